#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace chplane {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define CHPLANE_DEFINE_ERROR(Name)            \
    class Name : public Error {               \
    public:                                   \
        using Error::Error;                   \
    }

// image-io
CHPLANE_DEFINE_ERROR(DecodeError);
CHPLANE_DEFINE_ERROR(UnsupportedFormat);
CHPLANE_DEFINE_ERROR(IoError);
CHPLANE_DEFINE_ERROR(FormatError);

// ordinal-core
CHPLANE_DEFINE_ERROR(MatrixTooSmall);
CHPLANE_DEFINE_ERROR(LengthMismatch);
CHPLANE_DEFINE_ERROR(InvalidArgument);

// sift-features
CHPLANE_DEFINE_ERROR(ImageTooSmall);

// similarity-analysis
CHPLANE_DEFINE_ERROR(InsufficientRows);
CHPLANE_DEFINE_ERROR(DimensionMismatch);
CHPLANE_DEFINE_ERROR(ZeroVector);
CHPLANE_DEFINE_ERROR(TooFewItems);
CHPLANE_DEFINE_ERROR(NotEnoughRecords);

// ch-atlas
CHPLANE_DEFINE_ERROR(BadGridSpec);
CHPLANE_DEFINE_ERROR(DegenerateCovariance);
CHPLANE_DEFINE_ERROR(TooFewYears);
CHPLANE_DEFINE_ERROR(TooFewPerClass);

// econometrics
CHPLANE_DEFINE_ERROR(NonStationaryParams);
CHPLANE_DEFINE_ERROR(SingularDesign);
CHPLANE_DEFINE_ERROR(SeriesTooShort);
CHPLANE_DEFINE_ERROR(DegenerateVariance);

#undef CHPLANE_DEFINE_ERROR

/// Malformed manifest row. `row` is 1-based and counts the header as row 1.
class ManifestError : public Error {
public:
    ManifestError(std::size_t row, const std::string& what)
        : Error("manifest row " + std::to_string(row) + ": " + what), row_(row) {}

    [[nodiscard]] std::size_t row() const noexcept { return row_; }

private:
    std::size_t row_;
};

}  // namespace chplane
