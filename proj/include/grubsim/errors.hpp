#pragma once

#include <stdexcept>
#include <string>

namespace grubsim {

enum class ErrorKind {
    Config,            // malformed input, unknown ids, bad parameters
    LedgerCorruption,  // bandwidth went negative
    Invariant,         // a scheduler invariant failed during simulation
    Generation,        // workload generator gave up
    Io,
};

inline const char* to_string(ErrorKind k)
{
    switch (k) {
    case ErrorKind::Config: return "config";
    case ErrorKind::LedgerCorruption: return "ledger";
    case ErrorKind::Invariant: return "invariant";
    case ErrorKind::Generation: return "generation";
    case ErrorKind::Io: return "io";
    }
    return "unknown";
}

class SimError : public std::runtime_error {
public:
    SimError(ErrorKind kind, const std::string& what)
        : std::runtime_error(what), kind_(kind)
    {
    }

    ErrorKind kind() const noexcept { return kind_; }

private:
    ErrorKind kind_;
};

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what)
{
    throw SimError(kind, what);
}

} // namespace grubsim
