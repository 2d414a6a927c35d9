#include "core/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <numbers>
#include <vector>

#include "core/error.hpp"

namespace otstab {

struct Expression::Node {
    enum class Kind { number, var_x1, var_x2, neg, add, sub, mul, div, pow, sin, cos, exp, sqrt };
    Kind kind = Kind::number;
    double value = 0.0;
    std::shared_ptr<const Node> lhs, rhs;

    double eval(double x1, double x2) const
    {
        switch (kind) {
        case Kind::number: return value;
        case Kind::var_x1: return x1;
        case Kind::var_x2: return x2;
        case Kind::neg: return -lhs->eval(x1, x2);
        case Kind::add: return lhs->eval(x1, x2) + rhs->eval(x1, x2);
        case Kind::sub: return lhs->eval(x1, x2) - rhs->eval(x1, x2);
        case Kind::mul: return lhs->eval(x1, x2) * rhs->eval(x1, x2);
        case Kind::div: return lhs->eval(x1, x2) / rhs->eval(x1, x2);
        case Kind::pow: return std::pow(lhs->eval(x1, x2), rhs->eval(x1, x2));
        case Kind::sin: return std::sin(lhs->eval(x1, x2));
        case Kind::cos: return std::cos(lhs->eval(x1, x2));
        case Kind::exp: return std::exp(lhs->eval(x1, x2));
        case Kind::sqrt: return std::sqrt(lhs->eval(x1, x2));
        }
        return 0.0;
    }
};

namespace {

using NodePtr = std::shared_ptr<const Expression::Node>;
using Kind = Expression::Node::Kind;

NodePtr make(Kind kind, NodePtr lhs = nullptr, NodePtr rhs = nullptr, double value = 0.0)
{
    auto n = std::make_shared<Expression::Node>();
    n->kind = kind;
    n->lhs = std::move(lhs);
    n->rhs = std::move(rhs);
    n->value = value;
    return n;
}

class Parser {
public:
    explicit Parser(const std::string& text) : s_(text) {}

    NodePtr parse()
    {
        NodePtr n = expr();
        skip();
        if (pos_ != s_.size()) error("unexpected '" + std::string(1, s_[pos_]) + "'");
        return n;
    }

private:
    [[noreturn]] void error(const std::string& msg) const
    {
        fail(ErrorCode::invalid_config,
             "expression \"" + s_ + "\" at column " + std::to_string(pos_ + 1) + ": " + msg);
    }

    void skip()
    {
        while (pos_ < s_.size() && std::isspace(static_cast<unsigned char>(s_[pos_]))) ++pos_;
    }

    bool accept(char c)
    {
        skip();
        if (pos_ < s_.size() && s_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr expr()
    {
        NodePtr n = term();
        for (;;) {
            if (accept('+')) n = make(Kind::add, n, term());
            else if (accept('-')) n = make(Kind::sub, n, term());
            else return n;
        }
    }

    NodePtr term()
    {
        NodePtr n = unary();
        for (;;) {
            if (accept('*')) n = make(Kind::mul, n, unary());
            else if (accept('/')) n = make(Kind::div, n, unary());
            else return n;
        }
    }

    NodePtr unary()
    {
        if (accept('-')) return make(Kind::neg, unary());
        if (accept('+')) return unary();
        return power();
    }

    NodePtr power()
    {
        NodePtr base = primary();
        if (accept('^')) return make(Kind::pow, base, unary());
        return base;
    }

    NodePtr primary()
    {
        skip();
        if (pos_ >= s_.size()) error("unexpected end of input");
        if (accept('(')) {
            NodePtr n = expr();
            if (!accept(')')) error("expected ')'");
            return n;
        }
        const char c = s_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') {
            const char* begin = s_.c_str() + pos_;
            char* end = nullptr;
            const double v = std::strtod(begin, &end);
            if (end == begin) error("bad number");
            pos_ += static_cast<std::size_t>(end - begin);
            return make(Kind::number, nullptr, nullptr, v);
        }
        if (std::isalpha(static_cast<unsigned char>(c))) {
            std::size_t start = pos_;
            while (pos_ < s_.size() && std::isalnum(static_cast<unsigned char>(s_[pos_]))) ++pos_;
            const std::string id = s_.substr(start, pos_ - start);
            if (id == "x1") return make(Kind::var_x1);
            if (id == "x2") return make(Kind::var_x2);
            if (id == "pi") return make(Kind::number, nullptr, nullptr, std::numbers::pi);
            Kind fn;
            if (id == "sin") fn = Kind::sin;
            else if (id == "cos") fn = Kind::cos;
            else if (id == "exp") fn = Kind::exp;
            else if (id == "sqrt") fn = Kind::sqrt;
            else {
                pos_ = start;
                error("unknown identifier '" + id + "'");
            }
            if (!accept('(')) error("expected '(' after " + id);
            NodePtr arg = expr();
            if (!accept(')')) error("expected ')'");
            return make(fn, arg);
        }
        error("unexpected '" + std::string(1, c) + "'");
    }

    const std::string& s_;
    std::size_t pos_ = 0;
};

}  // namespace

Expression::Expression() : root_(make(Kind::number)), text_("0") {}

Expression Expression::parse(const std::string& text)
{
    Expression e;
    e.root_ = Parser(text).parse();
    e.text_ = text;
    return e;
}

Expression Expression::constant(double value)
{
    Expression e;
    e.root_ = make(Kind::number, nullptr, nullptr, value);
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", value);
    e.text_ = buf;
    return e;
}

double Expression::operator()(double x1, double x2) const { return root_->eval(x1, x2); }

}  // namespace otstab
