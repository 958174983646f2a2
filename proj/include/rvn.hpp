#pragma once

#include "rvn/core.hpp"
#include "rvn/grid.hpp"
#include "rvn/geodesic.hpp"
#include "rvn/scene.hpp"
#include "rvn/kinematics.hpp"
#include "rvn/sensing.hpp"
#include "rvn/episode.hpp"
#include "rvn/planner.hpp"
#include "rvn/follower.hpp"
#include "rvn/datagen.hpp"
#include "rvn/cor.hpp"
#include "rvn/eval.hpp"
#include "rvn/protocol.hpp"
#include "rvn/server.hpp"
