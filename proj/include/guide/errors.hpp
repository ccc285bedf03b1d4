#pragma once

#include <stdexcept>
#include <string>

namespace guide {

struct InvalidDimension : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct DegenerateStats : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidInput : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InfeasibleDesign : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct RangesInfeasible : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct TrainingFailed : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidStd : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct IllConditioned : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct NotCholesky : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct EmptyBox : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ProposalStuck : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidChainState : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct InvalidK : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct InvalidSubsetSize : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct IoError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

}  // namespace guide
