#include "errors.hpp"

namespace mcq {

const char* error_kind_name(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::dimension_mismatch: return "DimensionMismatch";
        case ErrorKind::invalid_distribution: return "InvalidDistribution";
        case ErrorKind::reward_out_of_bounds: return "RewardOutOfBounds";
        case ErrorKind::empty_dataset: return "EmptyDataset";
        case ErrorKind::length_mismatch: return "LengthMismatch";
        case ErrorKind::empty_mask: return "EmptyMask";
        case ErrorKind::non_finite: return "NonFinite";
        case ErrorKind::epsilon_out_of_range: return "EpsilonOutOfRange";
        case ErrorKind::shape_mismatch: return "ShapeMismatch";
        case ErrorKind::non_finite_input: return "NonFiniteInput";
        case ErrorKind::non_finite_loss: return "NonFiniteLoss";
        case ErrorKind::unknown_kind: return "UnknownKind";
        case ErrorKind::degenerate_refs: return "DegenerateRefs";
        case ErrorKind::missing_dataset: return "MissingDataset";
        case ErrorKind::bad_magic: return "BadMagic";
        case ErrorKind::version_mismatch: return "VersionMismatch";
        case ErrorKind::truncated: return "Truncated";
        case ErrorKind::duplicate_name: return "DuplicateName";
        case ErrorKind::config_error: return "ConfigError";
        case ErrorKind::io_error: return "IoError";
    }
    return "UnknownError";
}

}  // namespace mcq
