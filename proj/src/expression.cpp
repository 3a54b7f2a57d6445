#include "kinv/expression.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <cstring>
#include <numbers>
#include <sstream>

namespace kinv {

namespace {

ExprNodePtr make_const(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::constant;
    n->value = v;
    return n;
}

ExprNodePtr make_var(ExprVar var) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::variable;
    n->var = var;
    return n;
}

ExprNodePtr make_unary(ExprFunc f, ExprNodePtr arg) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::unary;
    n->func = f;
    n->lhs = std::move(arg);
    return n;
}

ExprNodePtr make_binary(char op, ExprNodePtr l, ExprNodePtr r) {
    auto n = std::make_shared<ExprNode>();
    n->kind = ExprNode::Kind::binary;
    n->op = op;
    n->lhs = std::move(l);
    n->rhs = std::move(r);
    return n;
}

// Recursive-descent parser. Grammar:
//   expr   := term (('+'|'-') term)*
//   term   := unary (('*'|'/') unary)*
//   unary  := '-' unary | power
//   power  := primary ('^' unary)?          (right-associative)
//   primary:= number | identifier | identifier '(' expr ')' | '(' expr ')'
class Parser {
public:
    explicit Parser(std::string_view text) : text_(text) {}

    ExprNodePtr run() {
        auto node = parse_expr();
        skip_ws();
        if (pos_ != text_.size())
            throw ExprParseError("unexpected trailing input", pos_);
        return node;
    }

private:
    std::string_view text_;
    size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
    }

    bool peek_is(char c) {
        skip_ws();
        return pos_ < text_.size() && text_[pos_] == c;
    }

    bool consume(char c) {
        if (peek_is(c)) {
            ++pos_;
            return true;
        }
        return false;
    }

    ExprNodePtr parse_expr() {
        auto lhs = parse_term();
        for (;;) {
            if (consume('+'))
                lhs = make_binary('+', lhs, parse_term());
            else if (consume('-'))
                lhs = make_binary('-', lhs, parse_term());
            else
                return lhs;
        }
    }

    ExprNodePtr parse_term() {
        auto lhs = parse_unary();
        for (;;) {
            if (consume('*'))
                lhs = make_binary('*', lhs, parse_unary());
            else if (consume('/'))
                lhs = make_binary('/', lhs, parse_unary());
            else
                return lhs;
        }
    }

    ExprNodePtr parse_unary() {
        if (consume('-')) return make_unary(ExprFunc::neg, parse_unary());
        return parse_power();
    }

    ExprNodePtr parse_power() {
        auto base = parse_primary();
        if (consume('^')) return make_binary('^', base, parse_unary());
        return base;
    }

    ExprNodePtr parse_primary() {
        skip_ws();
        if (pos_ >= text_.size()) throw ExprParseError("unexpected end of input", pos_);
        char c = text_[pos_];
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        if (consume('(')) {
            auto inner = parse_expr();
            if (!consume(')')) throw ExprParseError("expected ')'", pos_);
            return inner;
        }
        throw ExprParseError(std::string("syntax error near '") + c + "'", pos_);
    }

    ExprNodePtr parse_number() {
        size_t start = pos_;
        while (pos_ < text_.size() &&
               (std::isdigit(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '.'))
            ++pos_;
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            size_t exp_pos = pos_ + 1;
            if (exp_pos < text_.size() && (text_[exp_pos] == '+' || text_[exp_pos] == '-')) ++exp_pos;
            if (exp_pos < text_.size() && std::isdigit(static_cast<unsigned char>(text_[exp_pos]))) {
                pos_ = exp_pos;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) ++pos_;
            }
        }
        std::string token(text_.substr(start, pos_ - start));
        if (token.front() == '.') token.insert(token.begin(), '0');
        double value = 0.0;
        auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
        if (ec != std::errc() || ptr != token.data() + token.size())
            throw ExprParseError("malformed number '" + token + "'", start);
        return make_const(value);
    }

    ExprNodePtr parse_identifier() {
        size_t start = pos_;
        while (pos_ < text_.size() && (std::isalnum(static_cast<unsigned char>(text_[pos_])) || text_[pos_] == '_'))
            ++pos_;
        std::string name(text_.substr(start, pos_ - start));
        if (name == "x") return make_var(ExprVar::x);
        if (name == "v") return make_var(ExprVar::v);
        if (name == "t") return make_var(ExprVar::t);
        if (name == "vp") return make_var(ExprVar::vp);
        if (name == "pi") return make_const(std::numbers::pi);
        ExprFunc func;
        if (name == "sin") func = ExprFunc::sin;
        else if (name == "cos") func = ExprFunc::cos;
        else if (name == "exp") func = ExprFunc::exp;
        else if (name == "sqrt") func = ExprFunc::sqrt;
        else if (name == "abs") func = ExprFunc::abs;
        else throw ExprParseError("unknown identifier '" + name + "'", start);
        if (!consume('(')) throw ExprParseError("expected '(' after '" + name + "'", pos_);
        auto arg = parse_expr();
        if (!consume(')')) throw ExprParseError("expected ')'", pos_);
        return make_unary(func, arg);
    }
};

double eval_node(const ExprNode& n, const Bindings& b) {
    switch (n.kind) {
    case ExprNode::Kind::constant:
        return n.value;
    case ExprNode::Kind::variable: {
        const std::optional<double>* slot = nullptr;
        const char* name = "";
        switch (n.var) {
        case ExprVar::x: slot = &b.x; name = "x"; break;
        case ExprVar::v: slot = &b.v; name = "v"; break;
        case ExprVar::t: slot = &b.t; name = "t"; break;
        case ExprVar::vp: slot = &b.vp; name = "vp"; break;
        }
        if (!slot->has_value()) throw ExprEvalError(std::string("unbound variable '") + name + "'");
        return **slot;
    }
    case ExprNode::Kind::unary: {
        double a = eval_node(*n.lhs, b);
        switch (n.func) {
        case ExprFunc::neg: return -a;
        case ExprFunc::sin: return std::sin(a);
        case ExprFunc::cos: return std::cos(a);
        case ExprFunc::exp: return std::exp(a);
        case ExprFunc::sqrt:
            if (a < 0.0) throw ExprEvalError("domain error: sqrt of negative value");
            return std::sqrt(a);
        case ExprFunc::abs: return std::fabs(a);
        }
        throw ExprEvalError("corrupt expression node");
    }
    case ExprNode::Kind::binary: {
        double l = eval_node(*n.lhs, b);
        double r = eval_node(*n.rhs, b);
        switch (n.op) {
        case '+': return l + r;
        case '-': return l - r;
        case '*': return l * r;
        case '/':
            if (r == 0.0) throw ExprEvalError("domain error: division by zero");
            return l / r;
        case '^': {
            double p = std::pow(l, r);
            if (!std::isfinite(p)) throw ExprEvalError("domain error: non-finite power");
            return p;
        }
        }
        throw ExprEvalError("corrupt expression node");
    }
    }
    throw ExprEvalError("corrupt expression node");
}

// Precedence levels used by the printer; higher binds tighter.
int precedence(const ExprNode& n) {
    if (n.kind == ExprNode::Kind::binary) {
        if (n.op == '+' || n.op == '-') return 1;
        if (n.op == '*' || n.op == '/') return 2;
        return 4; // ^
    }
    if (n.kind == ExprNode::Kind::unary && n.func == ExprFunc::neg) return 3;
    return 5; // atoms and function calls
}

std::string format_double(double v) {
    char buf[64];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    return std::string(buf, ptr);
}

void print_node(const ExprNode& n, std::string& out) {
    switch (n.kind) {
    case ExprNode::Kind::constant:
        if (n.value < 0) {
            out += '(';
            out += format_double(n.value);
            out += ')';
        } else {
            out += format_double(n.value);
        }
        return;
    case ExprNode::Kind::variable:
        switch (n.var) {
        case ExprVar::x: out += 'x'; return;
        case ExprVar::v: out += 'v'; return;
        case ExprVar::t: out += 't'; return;
        case ExprVar::vp: out += "vp"; return;
        }
        return;
    case ExprNode::Kind::unary: {
        const char* name = nullptr;
        switch (n.func) {
        case ExprFunc::neg: name = nullptr; break;
        case ExprFunc::sin: name = "sin"; break;
        case ExprFunc::cos: name = "cos"; break;
        case ExprFunc::exp: name = "exp"; break;
        case ExprFunc::sqrt: name = "sqrt"; break;
        case ExprFunc::abs: name = "abs"; break;
        }
        if (name == nullptr) {
            out += '-';
            bool need = precedence(*n.lhs) < precedence(n);
            if (need) out += '(';
            print_node(*n.lhs, out);
            if (need) out += ')';
        } else {
            out += name;
            out += '(';
            print_node(*n.lhs, out);
            out += ')';
        }
        return;
    }
    case ExprNode::Kind::binary: {
        int prec = precedence(n);
        // Parens keep the printed form AST-faithful, not merely
        // value-equal: '^' groups right, everything else groups left, so
        // the off-side child needs parens even at equal precedence.
        bool lparen = precedence(*n.lhs) < prec || (n.op == '^' && precedence(*n.lhs) == prec);
        bool rparen = precedence(*n.rhs) < prec || (n.op != '^' && precedence(*n.rhs) == prec);
        if (lparen) out += '(';
        print_node(*n.lhs, out);
        if (lparen) out += ')';
        out += ' ';
        out += n.op;
        out += ' ';
        if (rparen) out += '(';
        print_node(*n.rhs, out);
        if (rparen) out += ')';
        return;
    }
    }
}

bool nodes_equal(const ExprNode& a, const ExprNode& b) {
    if (a.kind != b.kind) return false;
    switch (a.kind) {
    case ExprNode::Kind::constant:
        return a.value == b.value || (std::isnan(a.value) && std::isnan(b.value));
    case ExprNode::Kind::variable:
        return a.var == b.var;
    case ExprNode::Kind::unary:
        return a.func == b.func && nodes_equal(*a.lhs, *b.lhs);
    case ExprNode::Kind::binary:
        return a.op == b.op && nodes_equal(*a.lhs, *b.lhs) && nodes_equal(*a.rhs, *b.rhs);
    }
    return false;
}

} // namespace

Expression Expression::parse(std::string_view text) {
    return Expression(Parser(text).run());
}

Expression Expression::constant(double value) {
    // Negative literals have no source form; canonicalize to neg(|value|)
    // so every programmatic tree prints and reparses to itself.
    if (value < 0.0) return Expression(make_unary(ExprFunc::neg, make_const(-value)));
    if (value == 0.0) value = 0.0; // drop the sign of -0.0
    return Expression(make_const(value));
}

Expression Expression::variable(ExprVar var) { return Expression(make_var(var)); }

Expression Expression::unary(ExprFunc func, Expression arg) {
    return Expression(make_unary(func, arg.root_ ? arg.root_ : make_const(0.0)));
}

Expression Expression::binary(char op, Expression lhs, Expression rhs) {
    return Expression(make_binary(op, lhs.root_ ? lhs.root_ : make_const(0.0),
                                  rhs.root_ ? rhs.root_ : make_const(0.0)));
}

double Expression::eval(const Bindings& b) const {
    if (!root_) return 0.0;
    double v = eval_node(*root_, b);
    if (!std::isfinite(v)) throw ExprEvalError("expression evaluated to a non-finite value");
    return v;
}

std::string Expression::str() const {
    if (!root_) return "0";
    std::string out;
    print_node(*root_, out);
    return out;
}

bool Expression::is_zero_constant() const {
    if (!root_) return true;
    return root_->kind == ExprNode::Kind::constant && root_->value == 0.0;
}

bool Expression::same_as(const Expression& other) const {
    if (!root_ || !other.root_) return is_zero_constant() && other.is_zero_constant();
    return nodes_equal(*root_, *other.root_);
}

} // namespace kinv
