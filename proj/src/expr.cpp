#include "chainflow/expr.hpp"

#include <cctype>
#include <cmath>
#include <vector>

namespace chainflow {

namespace {

struct Node {
    enum class Op { constant, variable, add, sub, mul, div, pow, neg, sin, cos, exp };
    Op op;
    double value = 0.0;
    std::unique_ptr<Node> a, b;

    double eval(double x) const {
        switch (op) {
            case Op::constant: return value;
            case Op::variable: return x;
            case Op::add: return a->eval(x) + b->eval(x);
            case Op::sub: return a->eval(x) - b->eval(x);
            case Op::mul: return a->eval(x) * b->eval(x);
            case Op::div: return a->eval(x) / b->eval(x);
            case Op::pow: return std::pow(a->eval(x), b->eval(x));
            case Op::neg: return -a->eval(x);
            case Op::sin: return std::sin(a->eval(x));
            case Op::cos: return std::cos(a->eval(x));
            case Op::exp: return std::exp(a->eval(x));
        }
        return 0.0;
    }
};

using NodePtr = std::unique_ptr<Node>;

NodePtr make(Node::Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_unique<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

class Parser {
public:
    Parser(const std::string& text, const std::string& var)
        : text_(text), var_(var) {}

    NodePtr run() {
        NodePtr n = parse_sum();
        skip_ws();
        if (pos_ != text_.size())
            fail("unexpected trailing input at position " + std::to_string(pos_));
        return n;
    }

private:
    [[noreturn]] void fail(const std::string& msg) const {
        throw ExprError("expression error: " + msg + " in \"" + text_ + "\"");
    }

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos_ < text_.size() ? text_[pos_] : '\0';
    }

    NodePtr parse_sum() {
        NodePtr n = parse_product();
        while (true) {
            if (consume('+'))
                n = make(Node::Op::add, std::move(n), parse_product());
            else if (consume('-'))
                n = make(Node::Op::sub, std::move(n), parse_product());
            else
                return n;
        }
    }

    NodePtr parse_product() {
        NodePtr n = parse_unary();
        while (true) {
            if (consume('*'))
                n = make(Node::Op::mul, std::move(n), parse_unary());
            else if (consume('/'))
                n = make(Node::Op::div, std::move(n), parse_unary());
            else
                return n;
        }
    }

    NodePtr parse_unary() {
        if (consume('-')) return make(Node::Op::neg, parse_unary());
        if (consume('+')) return parse_unary();
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (consume('^')) {
            // right associative; exponent may itself be signed
            return make(Node::Op::pow, std::move(base), parse_unary());
        }
        return base;
    }

    NodePtr parse_atom() {
        skip_ws();
        if (pos_ >= text_.size()) fail("unexpected end of input");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr n = parse_sum();
            if (!consume(')')) fail("missing closing parenthesis");
            return n;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_word();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[end])) || text_[end] == '.' ||
                text_[end] == 'e' || text_[end] == 'E' ||
                ((text_[end] == '+' || text_[end] == '-') && end > pos_ &&
                 (text_[end - 1] == 'e' || text_[end - 1] == 'E'))))
            ++end;
        const std::string tok = text_.substr(pos_, end - pos_);
        try {
            auto n = make(Node::Op::constant);
            n->value = std::stod(tok);
            pos_ = end;
            return n;
        } catch (...) {
            fail("malformed number \"" + tok + "\"");
        }
    }

    NodePtr parse_word() {
        std::size_t end = pos_;
        while (end < text_.size() &&
               (std::isalnum(static_cast<unsigned char>(text_[end])) || text_[end] == '_'))
            ++end;
        const std::string word = text_.substr(pos_, end - pos_);
        pos_ = end;
        if (word == var_) return make(Node::Op::variable);
        if (word == "pi") {
            auto n = make(Node::Op::constant);
            n->value = M_PI;
            return n;
        }
        Node::Op op;
        if (word == "sin")
            op = Node::Op::sin;
        else if (word == "cos")
            op = Node::Op::cos;
        else if (word == "exp")
            op = Node::Op::exp;
        else
            fail("unknown identifier \"" + word + "\" (allowed: " + var_ +
                 ", pi, sin, cos, exp)");
        if (!consume('(')) fail("function \"" + word + "\" needs parentheses");
        NodePtr arg = parse_sum();
        if (!consume(')')) fail("missing closing parenthesis after " + word);
        return make(op, std::move(arg));
    }

    const std::string& text_;
    const std::string var_;
    std::size_t pos_ = 0;
};

}  // namespace

std::function<double(double)> compile_expr(const std::string& text,
                                           const std::string& var_name) {
    auto root = std::make_shared<NodePtr>(Parser(text, var_name).run());
    return [root](double x) { return (*root)->eval(x); };
}

}  // namespace chainflow
