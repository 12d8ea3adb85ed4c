#pragma once

#include <stdexcept>
#include <string>

namespace sfuda {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct DegenerateCluster : Error {
    using Error::Error;
};
struct EmptyCloud : Error {
    using Error::Error;
};
struct EmptyNeighborhood : Error {
    using Error::Error;
};
struct ShapeMismatch : Error {
    using Error::Error;
};
struct NonFiniteLoss : Error {
    using Error::Error;
};
struct LengthMismatch : Error {
    using Error::Error;
};
struct EmptyInput : Error {
    using Error::Error;
};
struct MissingLabels : Error {
    using Error::Error;
};
struct InvalidScript : Error {
    using Error::Error;
};
struct ConfigError : Error {
    using Error::Error;
};
struct IoError : Error {
    using Error::Error;
};

}  // namespace sfuda
