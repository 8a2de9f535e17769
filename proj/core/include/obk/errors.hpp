#ifndef OBK_ERRORS_HPP
#define OBK_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace obk {

struct SolverError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

struct ValidationError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// forms
struct CoefficientViolation : ValidationError { using ValidationError::ValidationError; };
struct NonFinite : ValidationError { using ValidationError::ValidationError; };
struct DegenerateForm : SolverError { using SolverError::SolverError; };

// measures
struct AtomOutOfDomain : ValidationError { using ValidationError::ValidationError; };

// pde / obstacle
struct StepSizeViolation : ValidationError { using ValidationError::ValidationError; };
struct NewtonDivergence : SolverError { using SolverError::SolverError; };
struct LcpStall : SolverError { using SolverError::SolverError; };
struct SeparationFail : SolverError { using SolverError::SolverError; };
struct NoSandwich : SolverError { using SolverError::SolverError; };

// switching
struct BoundsInverted : ValidationError { using ValidationError::ValidationError; };
struct NoConvergence : SolverError { using SolverError::SolverError; };
struct Unverifiable : ValidationError { using ValidationError::ValidationError; };

// montecarlo
struct RegimeViolation : ValidationError { using ValidationError::ValidationError; };
struct CoefficientRoughness : ValidationError { using ValidationError::ValidationError; };
struct RegressionSingular : SolverError { using SolverError::SolverError; };

} // namespace obk

#endif
