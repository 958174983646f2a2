#pragma once

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "rvn/core.hpp"

namespace rvn::net {

struct Address {
    std::string host = "127.0.0.1";
    std::uint16_t port = 0;
};

/// Parses "host:port" (host may be empty for 0.0.0.0).
inline Address parse_address(std::string_view text) {
    const auto colon = text.rfind(':');
    if (colon == std::string_view::npos) throw Error(ErrorCode::invalid_argument, "address must be host:port");
    Address a;
    a.host = std::string(text.substr(0, colon));
    if (a.host.empty()) a.host = "0.0.0.0";
    const std::string port(text.substr(colon + 1));
    char* end = nullptr;
    const long p = std::strtol(port.c_str(), &end, 10);
    if (port.empty() || *end != '\0' || p < 0 || p > 65535) throw Error(ErrorCode::invalid_argument, "bad port in " + std::string(text));
    a.port = static_cast<std::uint16_t>(p);
    return a;
}

class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
    Socket& operator=(Socket&& o) noexcept {
        if (this != &o) {
            close();
            fd_ = std::exchange(o.fd_, -1);
        }
        return *this;
    }
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;
    ~Socket() { close(); }

    int fd() const { return fd_; }
    bool valid() const { return fd_ >= 0; }
    void close() {
        if (fd_ >= 0) ::close(fd_);
        fd_ = -1;
    }
    void shutdown() {
        if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
    }

private:
    int fd_ = -1;
};

inline sockaddr_in resolve(const Address& a) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(a.port);
    if (::inet_pton(AF_INET, a.host.c_str(), &addr.sin_addr) == 1) return addr;
    addrinfo hints{};
    hints.ai_family = AF_INET;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    if (::getaddrinfo(a.host.c_str(), nullptr, &hints, &res) != 0 || !res)
        throw Error(ErrorCode::io_error, "cannot resolve host " + a.host);
    addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
    ::freeaddrinfo(res);
    return addr;
}

/// Buffered newline-delimited stream over a connected socket.
class LineStream {
public:
    explicit LineStream(Socket socket) : socket_(std::move(socket)) {}

    static LineStream connect(const Address& a) {
        Socket s(::socket(AF_INET, SOCK_STREAM, 0));
        if (!s.valid()) throw Error(ErrorCode::io_error, std::string("socket: ") + std::strerror(errno));
        const sockaddr_in addr = resolve(a);
        if (::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
            throw Error(ErrorCode::io_error, "connect to " + a.host + ":" + std::to_string(a.port) + ": " + std::strerror(errno));
        const int one = 1;
        ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
        return LineStream(std::move(s));
    }

    /// Next line without its LF; nullopt at end of stream.
    std::optional<std::string> read_line() {
        while (true) {
            const auto nl = buffer_.find('\n');
            if (nl != std::string::npos) {
                std::string line = buffer_.substr(0, nl);
                buffer_.erase(0, nl + 1);
                return line;
            }
            char chunk[4096];
            const ssize_t n = ::recv(socket_.fd(), chunk, sizeof chunk, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) {
                if (buffer_.empty()) return std::nullopt;
                std::string line = std::move(buffer_);
                buffer_.clear();
                return line;
            }
            buffer_.append(chunk, static_cast<std::size_t>(n));
        }
    }

    void write_line(std::string_view line) {
        std::string data(line);
        data.push_back('\n');
        write_all(data);
    }

    void write_all(std::string_view data) {
        std::size_t sent = 0;
        while (sent < data.size()) {
            const ssize_t n = ::send(socket_.fd(), data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) throw Error(ErrorCode::io_error, std::string("send: ") + std::strerror(errno));
            sent += static_cast<std::size_t>(n);
        }
    }

    void close() { socket_.close(); }
    void shutdown() { socket_.shutdown(); }

private:
    Socket socket_;
    std::string buffer_;
};

class Listener {
public:
    explicit Listener(const Address& a) {
        socket_ = Socket(::socket(AF_INET, SOCK_STREAM, 0));
        if (!socket_.valid()) throw Error(ErrorCode::io_error, std::string("socket: ") + std::strerror(errno));
        const int one = 1;
        ::setsockopt(socket_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
        const sockaddr_in addr = resolve(a);
        if (::bind(socket_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof addr) != 0)
            throw Error(ErrorCode::io_error, "bind " + a.host + ":" + std::to_string(a.port) + ": " + std::strerror(errno));
        if (::listen(socket_.fd(), 64) != 0) throw Error(ErrorCode::io_error, std::string("listen: ") + std::strerror(errno));
        sockaddr_in bound{};
        socklen_t len = sizeof bound;
        ::getsockname(socket_.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
        port_ = ntohs(bound.sin_port);
    }

    std::uint16_t port() const { return port_; }

    /// Blocks for the next connection; nullopt once the listener is shut down.
    std::optional<Socket> accept() {
        while (true) {
            const int fd = ::accept(socket_.fd(), nullptr, nullptr);
            if (fd >= 0) {
                const int one = 1;
                ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
                return Socket(fd);
            }
            if (errno == EINTR) continue;
            return std::nullopt;
        }
    }

    void shutdown() { socket_.shutdown(); }

private:
    Socket socket_;
    std::uint16_t port_ = 0;
};

}  // namespace rvn::net
