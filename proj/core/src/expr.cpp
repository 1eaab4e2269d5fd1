#include "dq/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <sstream>
#include <vector>

namespace dq {

struct Expression::Node {
    enum class Op {
        constant, variable, time, add, sub, mul, div, pow, neg,
        sin, cos, exp, abs, sqrt, min, max
    };
    Op op = Op::constant;
    double value = 0.0;
    int var_index = 0;
    std::shared_ptr<const Node> lhs, rhs;

    double eval(std::span<const double> x, double t) const {
        switch (op) {
            case Op::constant: return value;
            case Op::variable: return x[static_cast<std::size_t>(var_index)];
            case Op::time: return t;
            case Op::add: return lhs->eval(x, t) + rhs->eval(x, t);
            case Op::sub: return lhs->eval(x, t) - rhs->eval(x, t);
            case Op::mul: return lhs->eval(x, t) * rhs->eval(x, t);
            case Op::div: return lhs->eval(x, t) / rhs->eval(x, t);
            case Op::pow: return std::pow(lhs->eval(x, t), rhs->eval(x, t));
            case Op::neg: return -lhs->eval(x, t);
            case Op::sin: return std::sin(lhs->eval(x, t));
            case Op::cos: return std::cos(lhs->eval(x, t));
            case Op::exp: return std::exp(lhs->eval(x, t));
            case Op::abs: return std::abs(lhs->eval(x, t));
            case Op::sqrt: return std::sqrt(lhs->eval(x, t));
            case Op::min: return std::min(lhs->eval(x, t), rhs->eval(x, t));
            case Op::max: return std::max(lhs->eval(x, t), rhs->eval(x, t));
        }
        return 0.0;
    }
};

namespace {

using Node = Expression::Node;
using NodePtr = std::shared_ptr<const Node>;

struct Parser {
    const std::string& src;
    std::size_t pos = 0;
    int d;

    [[noreturn]] void fail(const std::string& what) const {
        std::ostringstream msg;
        msg << "parse error at position " << pos << ": " << what;
        throw ExprError(msg.str());
    }

    void skip_ws() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    NodePtr make(Node::Op op, NodePtr lhs = nullptr, NodePtr rhs = nullptr) {
        auto n = std::make_shared<Node>();
        n->op = op;
        n->lhs = std::move(lhs);
        n->rhs = std::move(rhs);
        return n;
    }

    NodePtr number() {
        skip_ws();
        const char* begin = src.c_str() + pos;
        char* end = nullptr;
        const double v = std::strtod(begin, &end);
        if (end == begin) fail("expected a number");
        pos += static_cast<std::size_t>(end - begin);
        auto n = std::make_shared<Node>();
        n->op = Node::Op::constant;
        n->value = v;
        return n;
    }

    NodePtr identifier() {
        skip_ws();
        std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            ++pos;
        const std::string name = src.substr(start, pos - start);
        if (name == "t") return make(Node::Op::time);
        if (name == "pi") {
            auto n = std::make_shared<Node>();
            n->op = Node::Op::constant;
            n->value = 3.14159265358979323846;
            return n;
        }
        if (name.size() >= 2 && name[0] == 'x') {
            int idx = std::atoi(name.c_str() + 1);
            if (idx >= 1 && idx <= d) {
                auto n = std::make_shared<Node>();
                n->op = Node::Op::variable;
                n->var_index = idx - 1;
                return n;
            }
            pos = start;
            fail("state variable '" + name + "' outside x1..x" + std::to_string(d));
        }

        Node::Op op;
        if (name == "sin") op = Node::Op::sin;
        else if (name == "cos") op = Node::Op::cos;
        else if (name == "exp") op = Node::Op::exp;
        else if (name == "abs") op = Node::Op::abs;
        else if (name == "sqrt") op = Node::Op::sqrt;
        else if (name == "min") op = Node::Op::min;
        else if (name == "max") op = Node::Op::max;
        else {
            pos = start;
            fail("unknown identifier '" + name + "'");
        }

        if (!eat('(')) fail("expected '(' after " + name);
        NodePtr a = expr();
        NodePtr b;
        if (op == Node::Op::min || op == Node::Op::max) {
            if (!eat(',')) fail("expected ',' in " + name + "(a, b)");
            b = expr();
        }
        if (!eat(')')) fail("expected ')'");
        return make(op, std::move(a), std::move(b));
    }

    NodePtr atom() {
        const char c = peek();
        if (c == '(') {
            eat('(');
            NodePtr inner = expr();
            if (!eat(')')) fail("expected ')'");
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail("unexpected character");
    }

    NodePtr power() {
        NodePtr base = atom();
        if (peek() == '^') {
            eat('^');
            // right-associative exponent; unary minus binds to the exponent
            NodePtr e = unary();
            return make(Node::Op::pow, std::move(base), std::move(e));
        }
        return base;
    }

    NodePtr unary() {
        if (peek() == '-') {
            eat('-');
            return make(Node::Op::neg, unary());
        }
        if (peek() == '+') eat('+');
        return power();
    }

    NodePtr term() {
        NodePtr lhs = unary();
        while (true) {
            const char c = peek();
            if (c == '*') {
                eat('*');
                lhs = make(Node::Op::mul, std::move(lhs), unary());
            } else if (c == '/') {
                eat('/');
                lhs = make(Node::Op::div, std::move(lhs), unary());
            } else {
                return lhs;
            }
        }
    }

    NodePtr expr() {
        NodePtr lhs = term();
        while (true) {
            const char c = peek();
            if (c == '+') {
                eat('+');
                lhs = make(Node::Op::add, std::move(lhs), term());
            } else if (c == '-') {
                eat('-');
                lhs = make(Node::Op::sub, std::move(lhs), term());
            } else {
                return lhs;
            }
        }
    }
};

}  // namespace

Expression Expression::parse(const std::string& source, int d) {
    if (d < 1) throw ExprError("expression dimension must be >= 1");
    Parser parser{source, 0, d};
    NodePtr root = parser.expr();
    parser.skip_ws();
    if (parser.pos != source.size()) parser.fail("trailing input");
    Expression e;
    e.root_ = std::move(root);
    e.source_ = source;
    return e;
}

double Expression::eval(std::span<const double> x, double t) const {
    if (!root_) throw ExprError("empty expression");
    return root_->eval(x, t);
}

}  // namespace dq
