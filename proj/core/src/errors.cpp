#include "spinpat/errors.hpp"

namespace spinpat {

std::string_view to_string(ErrorKind kind) {
    switch (kind) {
        case ErrorKind::InvalidParameter: return "invalid-parameter";
        case ErrorKind::InvalidInput: return "invalid-input";
        case ErrorKind::NoSwitching: return "no-switching";
        case ErrorKind::Lookup: return "lookup";
        case ErrorKind::Topology: return "topology";
        case ErrorKind::InvalidFanIn: return "invalid-fan-in";
        case ErrorKind::FanInCap: return "fan-in-cap";
        case ErrorKind::DimensionMismatch: return "dimension-mismatch";
        case ErrorKind::InvalidTrainingSet: return "invalid-training-set";
        case ErrorKind::Partition: return "partition";
        case ErrorKind::CalibrationRequired: return "calibration-required";
        case ErrorKind::State: return "state";
        case ErrorKind::Parse: return "parse";
        case ErrorKind::Config: return "config";
        case ErrorKind::UnknownExperiment: return "unknown-experiment";
        case ErrorKind::Io: return "io";
    }
    return "error";
}

}  // namespace spinpat
