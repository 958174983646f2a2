#pragma once

#include <atomic>
#include <iostream>
#include <list>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "rvn/net.hpp"
#include "rvn/protocol.hpp"

namespace rvn {

/// Serves line-delimited requests from `in` to `out` until end of input.
inline void serve_stream(std::istream& in, std::ostream& out, std::shared_ptr<const protocol::ServerContext> ctx,
                         std::string session_id = "stdio-0") {
    protocol::Session session(std::move(ctx), std::move(session_id));
    for (std::string line; std::getline(in, line);) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        out << session.handle(line) << '\n' << std::flush;
    }
}

/// TCP front end: one thread and one Session per connection.
class Server {
public:
    Server(const net::Address& bind, std::shared_ptr<const protocol::ServerContext> ctx)
        : listener_(bind), ctx_(std::move(ctx)) {}

    ~Server() { stop(); }

    std::uint16_t port() const { return listener_.port(); }

    /// Accept loop; returns after stop().
    void run() {
        while (!stopping_) {
            auto sock = listener_.accept();
            if (!sock) break;
            if (stopping_) break;
            auto conn = std::make_shared<Connection>(net::LineStream(std::move(*sock)));
            std::lock_guard lock(mutex_);
            reap_finished();
            const std::string id = "s" + std::to_string(next_id_++);
            connections_.push_back(conn);
            conn->thread = std::thread([this, conn, id] { serve_connection(*conn, id); });
        }
    }

    void start() {
        runner_ = std::thread([this] { run(); });
    }

    void stop() {
        if (stopping_.exchange(true)) return;
        listener_.shutdown();
        if (runner_.joinable()) runner_.join();
        std::list<std::shared_ptr<Connection>> conns;
        {
            std::lock_guard lock(mutex_);
            conns.swap(connections_);
        }
        for (auto& c : conns) c->stream.shutdown();
        for (auto& c : conns)
            if (c->thread.joinable()) c->thread.join();
    }

private:
    struct Connection {
        explicit Connection(net::LineStream s) : stream(std::move(s)) {}
        net::LineStream stream;
        std::thread thread;
        std::atomic<bool> finished{false};
    };

    void reap_finished() {
        for (auto it = connections_.begin(); it != connections_.end();) {
            if ((*it)->finished) {
                (*it)->thread.join();
                it = connections_.erase(it);
            } else {
                ++it;
            }
        }
    }

    void serve_connection(Connection& conn, const std::string& id) {
        protocol::Session session(ctx_, id);
        try {
            while (auto line = conn.stream.read_line()) {
                if (!line->empty() && line->back() == '\r') line->pop_back();
                conn.stream.write_line(session.handle(*line));
            }
        } catch (const Error&) {
            // peer went away mid-write
        }
        conn.finished = true;
    }

    net::Listener listener_;
    std::shared_ptr<const protocol::ServerContext> ctx_;
    std::atomic<bool> stopping_{false};
    std::thread runner_;
    std::mutex mutex_;
    std::list<std::shared_ptr<Connection>> connections_;
    std::uint64_t next_id_ = 0;
};

}  // namespace rvn
