#pragma once

#include <functional>
#include <memory>
#include <stdexcept>
#include <string>

namespace chainflow {

class ExprError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Compiles an arithmetic expression in one named variable into a callable.
// Whitelisted surface: numbers, the variable, pi, + - * / ^, parentheses,
// and the functions sin, cos, exp.
std::function<double(double)> compile_expr(const std::string& text,
                                           const std::string& var_name);

}  // namespace chainflow
