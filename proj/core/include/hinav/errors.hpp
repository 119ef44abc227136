#pragma once

#include <stdexcept>
#include <string>

namespace hinav {

struct NavError : std::runtime_error {
  explicit NavError(const std::string& msg) : std::runtime_error(msg) {}
};

// Graph environment
struct EmptyPoseList : NavError { using NavError::NavError; };
struct ForwardBlocked : NavError { using NavError::NavError; };
struct EmptyCell : NavError { using NavError::NavError; };

// Maze environment
struct NonRectangular : NavError { using NavError::NavError; };
struct OpenBoundary : NavError { using NavError::NavError; };
struct PoseInsideWall : NavError { using NavError::NavError; };

// Numerics
struct ShapeMismatch : NavError { using NavError::NavError; };
struct NonFinite : NavError { using NavError::NavError; };

// Supervision paths
struct NoTargetStates : NavError { using NavError::NavError; };
struct DisconnectedPath : NavError { using NavError::NavError; };
struct UnknownState : NavError { using NavError::NavError; };
struct PathTargetMismatch : NavError { using NavError::NavError; };

// Evaluation / config
struct CorridorFullyBlocked : NavError { using NavError::NavError; };
struct ConfigInvalid : NavError { using NavError::NavError; };
struct IoError : NavError { using NavError::NavError; };

}  // namespace hinav
