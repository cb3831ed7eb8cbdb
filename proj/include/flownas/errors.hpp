#pragma once

#include <stdexcept>
#include <string>

namespace flownas {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// capture / packet decoding
struct BadMagic : Error { using Error::Error; };
struct TruncatedRecord : Error { using Error::Error; };
struct MalformedHeader : Error { using Error::Error; };

// preprocessing / dataset files
struct InvalidStrategy : Error { using Error::Error; };
struct EmptySession : Error { using Error::Error; };
struct LengthMismatch : Error { using Error::Error; };
struct LabelOutOfRange : Error { using Error::Error; };

// architecture / cost model
struct DegenerateShape : Error { using Error::Error; };
struct ParseError : Error { using Error::Error; };

// search
struct BudgetExhausted : Error { using Error::Error; };
struct CorruptCheckpoint : Error { using Error::Error; };

// training engine
struct ShapeMismatch : Error { using Error::Error; };
struct NonFiniteActivation : Error { using Error::Error; };
struct EmptyDataset : Error { using Error::Error; };
struct DivergedLoss : Error { using Error::Error; };

// quantizer
struct EmptyCalibration : Error { using Error::Error; };
struct NotCalibrated : Error { using Error::Error; };

// cli
struct ConfigError : Error { using Error::Error; };
struct IoError : Error { using Error::Error; };

} // namespace flownas
