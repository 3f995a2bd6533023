#pragma once

#include <stdexcept>
#include <string>

namespace qoc {

// Base class for everything this library throws on purpose.
struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define QOC_DEFINE_ERROR(name)                                        \
    struct name : Error {                                             \
        explicit name(const std::string& msg) : Error(msg) {}         \
    }

QOC_DEFINE_ERROR(DimMismatch);        // operand shapes disagree
QOC_DEFINE_ERROR(NonHermitian);       // Hermitian input required
QOC_DEFINE_ERROR(ConvergenceFailure); // iteration budget exhausted
QOC_DEFINE_ERROR(NonFinite);          // NaN or Inf surfaced in a computation
QOC_DEFINE_ERROR(BadGrid);            // invalid time grid (empty, negative step, ...)
QOC_DEFINE_ERROR(OutOfRange);         // scalar argument outside its valid range
QOC_DEFINE_ERROR(BadIndex);           // index outside a container or group
QOC_DEFINE_ERROR(StepUnderflow);      // adaptive integrator step shrank below the floor
QOC_DEFINE_ERROR(CacheMismatch);      // forward/backward caches from different problems
QOC_DEFINE_ERROR(BadProbability);     // probability-like argument outside [0, 1]
QOC_DEFINE_ERROR(SingularJacobian);   // normal equations unsolvable even with damping
QOC_DEFINE_ERROR(LineSearchFailure);  // no acceptable step along the search direction
QOC_DEFINE_ERROR(NotAChannel);        // Kraus set does not satisfy the completeness sum
QOC_DEFINE_ERROR(ZeroAnharmonicity);  // leakage model degenerates when Delta = 0
QOC_DEFINE_ERROR(ConfigError);        // malformed or unknown configuration input
QOC_DEFINE_ERROR(IoError);            // file could not be read or written

#undef QOC_DEFINE_ERROR

}  // namespace qoc
