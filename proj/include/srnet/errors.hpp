#pragma once

#include <stdexcept>
#include <string>

namespace srnet {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// image I/O
struct IoError : Error { using Error::Error; };
struct UnsupportedFormat : Error { using Error::Error; };
struct CorruptHeader : Error { using Error::Error; };
struct MalformedRow : Error { using Error::Error; };
struct NonContiguousIndices : Error { using Error::Error; };

// geometry / shape
struct ImageTooSmall : Error { using Error::Error; };
struct FieldTooSmall : Error { using Error::Error; };
struct DimensionMismatch : Error { using Error::Error; };
struct ShapeMismatch : Error { using Error::Error; };
struct DepthMismatch : Error { using Error::Error; };
struct ClassCountMismatch : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct WindowTooLarge : Error { using Error::Error; };
struct PointOutOfDomain : Error { using Error::Error; };

// clustering / statistics
struct KTooLarge : Error { using Error::Error; };
struct EmptyInput : Error { using Error::Error; };
struct EmptyMask : Error { using Error::Error; };
struct DegenerateSample : Error { using Error::Error; };

// configuration
struct ConfigError : Error { using Error::Error; };

} // namespace srnet
