#pragma once

#include <memory>
#include <string>

namespace otstab {

/// Closed-form scalar coefficient in the variables x1, x2.
///
/// Grammar: numbers, x1, x2, pi, binary + - * / ^ (right associative),
/// unary minus, parentheses, and the functions sin cos exp sqrt.
class Expression {
public:
    Expression();  // the constant 0
    static Expression parse(const std::string& text);
    static Expression constant(double value);

    double operator()(double x1, double x2) const;
    const std::string& text() const noexcept { return text_; }

    struct Node;

private:
    std::shared_ptr<const Node> root_;
    std::string text_;
};

}  // namespace otstab
