#pragma once

#include <stdexcept>
#include <string>

namespace gcp {

enum class errc {
    stationary_with_infinite_mean,
    invalid_window,
    continuity_required,
    too_large,
    out_of_range,
    no_witness,
    lookback_outside_window,
    too_many_paths,
    supercritical_p,
    grid_exhausts_window,
    insufficient_range,
    config_invalid,
    output_path_unwritable,
    invalid_argument,
};

inline const char* errc_name(errc c) {
    switch (c) {
    case errc::stationary_with_infinite_mean: return "StationaryWithInfiniteMean";
    case errc::invalid_window: return "InvalidWindow";
    case errc::continuity_required: return "ContinuityRequired";
    case errc::too_large: return "TooLarge";
    case errc::out_of_range: return "OutOfRange";
    case errc::no_witness: return "NoWitness";
    case errc::lookback_outside_window: return "LookbackOutsideWindow";
    case errc::too_many_paths: return "TooManyPaths";
    case errc::supercritical_p: return "SupercriticalP";
    case errc::grid_exhausts_window: return "GridExhaustsWindow";
    case errc::insufficient_range: return "InsufficientRange";
    case errc::config_invalid: return "ConfigInvalid";
    case errc::output_path_unwritable: return "OutputPathUnwritable";
    case errc::invalid_argument: return "InvalidArgument";
    }
    return "Unknown";
}

class error : public std::runtime_error {
public:
    error(errc code, const std::string& what)
        : std::runtime_error(std::string(errc_name(code)) + ": " + what), code_(code) {}
    errc code() const noexcept { return code_; }

private:
    errc code_;
};

[[noreturn]] inline void fail(errc code, const std::string& what) { throw error(code, what); }

inline void require(bool cond, errc code, const std::string& what) {
    if (!cond) fail(code, what);
}

} // namespace gcp
