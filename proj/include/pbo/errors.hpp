#ifndef PBO_ERRORS_HPP
#define PBO_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace pbo {

    /// Violated precondition (dimension mismatch, invalid parameter, ...).
    class ContractError : public std::invalid_argument {
    public:
        using std::invalid_argument::invalid_argument;
    };

    /// Cholesky factorization of a kernel matrix failed.
    class SingularMatrixError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    /// External objective process misbehaved: exit, malformed reply, timeout.
    class ProtocolError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    /// Bad experiment / run configuration.
    class ConfigError : public std::runtime_error {
    public:
        using std::runtime_error::runtime_error;
    };

    namespace detail {
        inline void require(bool cond, const std::string& msg)
        {
            if (!cond)
                throw ContractError(msg);
        }
    } // namespace detail

} // namespace pbo

#endif
