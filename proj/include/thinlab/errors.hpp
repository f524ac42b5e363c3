#pragma once

#include <stdexcept>
#include <string>

namespace thinlab {

enum class Errc {
    invalid_argument,
    config,
    disconnected_domain,
    non_nice_decomposition,
    nonconforming_input,
    unclassifiable,
    quadrature_failure,
    singular_weight,
    eigensolver_failure,
    hypothesis_violation,
    degenerate_eigenvalue,
    no_admissible_nu,
    tail_truncation_too_coarse,
    contraction_violated,
    nu_mismatch,
    flux_sign_violation,
    blow_up,
    empty_sample,
    quadrature_mismatch,
};

inline const char* errc_name(Errc c) {
    switch (c) {
    case Errc::invalid_argument: return "InvalidArgument";
    case Errc::config: return "ConfigError";
    case Errc::disconnected_domain: return "DisconnectedDomain";
    case Errc::non_nice_decomposition: return "NonNiceDecomposition";
    case Errc::nonconforming_input: return "NonconformingInput";
    case Errc::unclassifiable: return "Unclassifiable";
    case Errc::quadrature_failure: return "QuadratureFailure";
    case Errc::singular_weight: return "SingularWeight";
    case Errc::eigensolver_failure: return "EigensolverFailure";
    case Errc::hypothesis_violation: return "HypothesisViolation";
    case Errc::degenerate_eigenvalue: return "DegenerateEigenvalue";
    case Errc::no_admissible_nu: return "NoAdmissibleNu";
    case Errc::tail_truncation_too_coarse: return "TailTruncationTooCoarse";
    case Errc::contraction_violated: return "ContractionViolated";
    case Errc::nu_mismatch: return "NuMismatch";
    case Errc::flux_sign_violation: return "FluxSignViolation";
    case Errc::blow_up: return "BlowUp";
    case Errc::empty_sample: return "EmptySample";
    case Errc::quadrature_mismatch: return "QuadratureMismatch";
    }
    return "Unknown";
}

class Error : public std::runtime_error {
public:
    Error(Errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}

    Errc code() const noexcept { return code_; }

    // process exit status used by the command line front end
    int exit_code() const noexcept {
        switch (code_) {
        case Errc::no_admissible_nu:
        case Errc::flux_sign_violation:
            return 4;
        case Errc::blow_up:
            return 5;
        case Errc::eigensolver_failure:
        case Errc::quadrature_failure:
        case Errc::contraction_violated:
        case Errc::tail_truncation_too_coarse:
        case Errc::degenerate_eigenvalue:
        case Errc::nu_mismatch:
        case Errc::empty_sample:
        case Errc::quadrature_mismatch:
        case Errc::singular_weight:
        case Errc::hypothesis_violation:
        case Errc::unclassifiable:
            return 3;
        default:
            return 2;
        }
    }

private:
    Errc code_;
};

[[noreturn]] inline void fail(Errc c, const std::string& msg) { throw Error(c, msg); }

inline void require(bool ok, Errc c, const std::string& msg) {
    if (!ok) fail(c, msg);
}

} // namespace thinlab
