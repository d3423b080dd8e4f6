#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace droplet {

// Stable error taxonomy. The CLI echoes to_string(kind) in its JSON errors.
enum class error_kind {
    usage,
    domain,
    precondition,
    resonance,
    convergence,
    bracket,
    handoff,
    unreachable_mass,
};

constexpr std::string_view to_string(error_kind kind) noexcept
{
    switch (kind) {
    case error_kind::usage: return "usage";
    case error_kind::domain: return "domain";
    case error_kind::precondition: return "precondition";
    case error_kind::resonance: return "resonance";
    case error_kind::convergence: return "convergence";
    case error_kind::bracket: return "bracket";
    case error_kind::handoff: return "handoff";
    case error_kind::unreachable_mass: return "unreachable_mass";
    }
    return "unknown";
}

class error : public std::runtime_error {
public:
    error(error_kind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

    error_kind kind() const noexcept { return kind_; }

    // Usage and domain errors are caller mistakes; everything else is a numerical failure.
    bool is_numerical() const noexcept
    {
        return kind_ != error_kind::usage && kind_ != error_kind::domain
               && kind_ != error_kind::precondition;
    }

private:
    error_kind kind_;
};

} // namespace droplet
