#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace latvar {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using Eigen::Index;

// All recoverable failures surface as latvar::Error; the `kind` tag lets the
// CLI map computation failures vs usage errors onto distinct exit codes.
class Error : public std::runtime_error {
public:
    enum class Kind { Spec, Data, Numerical, Usage };

    Error(Kind kind, const std::string& msg) : std::runtime_error(msg), kind_(kind) {}
    Kind kind() const { return kind_; }

    static Error spec(const std::string& msg) { return Error(Kind::Spec, msg); }
    static Error data(const std::string& msg) { return Error(Kind::Data, msg); }
    static Error numerical(const std::string& msg) { return Error(Kind::Numerical, msg); }
    static Error usage(const std::string& msg) { return Error(Kind::Usage, msg); }

private:
    Kind kind_;
};

} // namespace latvar
