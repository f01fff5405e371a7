#include "vturnpike/exprlang.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <sstream>
#include <utility>

#include "vturnpike/dual.hpp"
#include "vturnpike/errors.hpp"

namespace vturnpike::expr {

namespace {

using NodePtr = std::shared_ptr<const Node>;

struct FunctionName {
    std::string_view name;
    Function fn;
};

constexpr FunctionName kFunctions[] = {
    {"sin", Function::Sin},   {"cos", Function::Cos},   {"exp", Function::Exp}, {"sinh", Function::Sinh},
    {"cosh", Function::Cosh}, {"tanh", Function::Tanh}, {"abs", Function::Abs},
};

std::string_view function_name(Function fn) {
    for (const auto& f : kFunctions) {
        if (f.fn == fn) return f.name;
    }
    return "?";
}

std::string format_number(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

NodePtr make_leaf(NodeKind kind, double number = 0.0, int index = 0) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->number = number;
    n->index = index;
    return n;
}

NodePtr make_op(NodeKind kind, std::vector<NodePtr> children, Function fn = Function::Sin) {
    auto n = std::make_shared<Node>();
    n->kind = kind;
    n->function = fn;
    n->children = std::move(children);
    return n;
}

class Parser {
public:
    explicit Parser(std::string_view src) : src_(src) {}

    NodePtr parse_all() {
        skip_space();
        if (pos_ >= src_.size()) fail("empty expression");
        NodePtr e = parse_sum();
        skip_space();
        if (pos_ < src_.size()) fail(std::string("unexpected character '") + src_[pos_] + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& what) const { fail_at(what, pos_); }

    [[noreturn]] void fail_at(const std::string& what, std::size_t at) const {
        int line = 1;
        int col = 1;
        for (std::size_t i = 0; i < at && i < src_.size(); ++i) {
            if (src_[i] == '\n') {
                ++line;
                col = 1;
            } else {
                ++col;
            }
        }
        std::ostringstream msg;
        msg << "syntax error at line " << line << ", column " << col << ": " << what;
        throw SyntaxError(msg.str(), line, col);
    }

    void skip_space() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_space();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    NodePtr parse_sum() {
        NodePtr lhs = parse_product();
        for (;;) {
            if (accept('+')) {
                lhs = make_op(NodeKind::Add, {lhs, parse_product()});
            } else if (accept('-')) {
                lhs = make_op(NodeKind::Sub, {lhs, parse_product()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_product() {
        NodePtr lhs = parse_unary();
        for (;;) {
            if (accept('*')) {
                lhs = make_op(NodeKind::Mul, {lhs, parse_unary()});
            } else if (accept('/')) {
                lhs = make_op(NodeKind::Div, {lhs, parse_unary()});
            } else {
                return lhs;
            }
        }
    }

    NodePtr parse_unary() {
        if (accept('-')) return make_op(NodeKind::Negate, {parse_unary()});
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (accept('^')) return make_op(NodeKind::Pow, {base, parse_unary()});
        return base;
    }

    NodePtr parse_atom() {
        skip_space();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = parse_sum();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return parse_identifier();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) {
            ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < src_.size() && (src_[p] == '+' || src_[p] == '-')) ++p;
            if (p < src_.size() && std::isdigit(static_cast<unsigned char>(src_[p]))) {
                pos_ = p;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
        }
        const std::string text(src_.substr(start, pos_ - start));
        char* end = nullptr;
        const double value = std::strtod(text.c_str(), &end);
        if (end != text.c_str() + text.size()) fail_at("malformed number '" + text + "'", start);
        return make_leaf(NodeKind::Number, value);
    }

    NodePtr parse_identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) {
            ++pos_;
        }
        const std::string_view ident = src_.substr(start, pos_ - start);

        if (ident == "v" || ident == "u") {
            expect('[');
            skip_space();
            const std::size_t idx_start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            if (pos_ == idx_start) fail("expected a non-negative integer index");
            const int index = std::stoi(std::string(src_.substr(idx_start, pos_ - idx_start)));
            expect(']');
            return make_leaf(ident == "v" ? NodeKind::VelocityVar : NodeKind::InputVar, 0.0, index);
        }
        for (const auto& f : kFunctions) {
            if (f.name == ident) {
                expect('(');
                NodePtr arg = parse_sum();
                expect(')');
                return make_op(NodeKind::Call, {arg}, f.fn);
            }
        }
        std::ostringstream msg;
        msg << "unknown identifier '" << ident << "' at column " << start + 1
            << "; valid variables are v[i] and u[j]; functions:";
        for (const auto& f : kFunctions) msg << ' ' << f.name;
        throw LookupError(msg.str());
    }

    std::string_view src_;
    std::size_t pos_ = 0;
};

void print(const Node& n, std::string& out) {
    switch (n.kind) {
        case NodeKind::Number:
            out += format_number(n.number);
            return;
        case NodeKind::VelocityVar:
            out += "v[" + std::to_string(n.index) + "]";
            return;
        case NodeKind::InputVar:
            out += "u[" + std::to_string(n.index) + "]";
            return;
        case NodeKind::Negate:
            out += "(-";
            print(*n.children[0], out);
            out += ")";
            return;
        case NodeKind::Call:
            out += function_name(n.function);
            out += "(";
            print(*n.children[0], out);
            out += ")";
            return;
        default:
            break;
    }
    const char* op = " ? ";
    switch (n.kind) {
        case NodeKind::Add: op = " + "; break;
        case NodeKind::Sub: op = " - "; break;
        case NodeKind::Mul: op = " * "; break;
        case NodeKind::Div: op = " / "; break;
        case NodeKind::Pow: op = "^"; break;
        default: break;
    }
    out += "(";
    print(*n.children[0], out);
    out += op;
    print(*n.children[1], out);
    out += ")";
}

bool nodes_equal(const Node& a, const Node& b) {
    if (a.kind != b.kind || a.children.size() != b.children.size()) return false;
    switch (a.kind) {
        case NodeKind::Number:
            if (a.number != b.number) return false;
            break;
        case NodeKind::VelocityVar:
        case NodeKind::InputVar:
            if (a.index != b.index) return false;
            break;
        case NodeKind::Call:
            if (a.function != b.function) return false;
            break;
        default:
            break;
    }
    for (std::size_t i = 0; i < a.children.size(); ++i) {
        if (!nodes_equal(*a.children[i], *b.children[i])) return false;
    }
    return true;
}

int arity(const Node& n, NodeKind kind) {
    int best = n.kind == kind ? n.index + 1 : 0;
    for (const auto& c : n.children) best = std::max(best, arity(*c, kind));
    return best;
}

std::string node_text(const Node& n) {
    std::string s;
    print(n, s);
    return s;
}

[[noreturn]] void domain_failure(const Node& n, const char* what) {
    throw DomainError(std::string(what) + " in '" + node_text(n) + "'");
}

// Evaluation is generic over double and Dual; leaves are supplied by the caller.
template <typename Scalar, typename Leaf>
Scalar eval_node(const Node& n, const Leaf& leaf) {
    using std::abs, std::cos, std::cosh, std::exp, std::pow, std::sin, std::sinh, std::tanh;
    Scalar out{};
    switch (n.kind) {
        case NodeKind::Number:
            return Scalar(n.number);
        case NodeKind::VelocityVar:
        case NodeKind::InputVar:
            return leaf(n);
        case NodeKind::Negate:
            out = -eval_node<Scalar>(*n.children[0], leaf);
            break;
        case NodeKind::Add:
            out = eval_node<Scalar>(*n.children[0], leaf) + eval_node<Scalar>(*n.children[1], leaf);
            break;
        case NodeKind::Sub:
            out = eval_node<Scalar>(*n.children[0], leaf) - eval_node<Scalar>(*n.children[1], leaf);
            break;
        case NodeKind::Mul:
            out = eval_node<Scalar>(*n.children[0], leaf) * eval_node<Scalar>(*n.children[1], leaf);
            break;
        case NodeKind::Div: {
            const Scalar num = eval_node<Scalar>(*n.children[0], leaf);
            const Scalar den = eval_node<Scalar>(*n.children[1], leaf);
            double den_value;
            if constexpr (std::is_same_v<Scalar, double>) {
                den_value = den;
            } else {
                den_value = den.value;
            }
            if (den_value == 0.0) domain_failure(n, "division by zero");
            out = num / den;
            break;
        }
        case NodeKind::Pow:
            out = pow(eval_node<Scalar>(*n.children[0], leaf), eval_node<Scalar>(*n.children[1], leaf));
            break;
        case NodeKind::Call: {
            const Scalar a = eval_node<Scalar>(*n.children[0], leaf);
            switch (n.function) {
                case Function::Sin: out = sin(a); break;
                case Function::Cos: out = cos(a); break;
                case Function::Exp: out = exp(a); break;
                case Function::Sinh: out = sinh(a); break;
                case Function::Cosh: out = cosh(a); break;
                case Function::Tanh: out = tanh(a); break;
                case Function::Abs: out = abs(a); break;
            }
            break;
        }
    }
    if constexpr (std::is_same_v<Scalar, double>) {
        if (!std::isfinite(out)) domain_failure(n, "non-finite result");
    } else {
        if (!std::isfinite(out.value) || (out.grad.size() && !out.grad.allFinite())) {
            domain_failure(n, "non-finite result");
        }
    }
    return out;
}

void check_inputs(const Expr& e, const Vec& v, const Vec& u) {
    check_dimensions(e, static_cast<int>(v.size()), static_cast<int>(u.size()));
}

}  // namespace

std::string Expr::to_string() const {
    std::string out;
    print(*root_, out);
    return out;
}

int Expr::velocity_arity() const { return arity(*root_, NodeKind::VelocityVar); }
int Expr::input_arity() const { return arity(*root_, NodeKind::InputVar); }

bool operator==(const Expr& a, const Expr& b) { return nodes_equal(*a.root_, *b.root_); }

Expr parse(std::string_view source) { return Expr(Parser(source).parse_all()); }

void check_dimensions(const Expr& e, int n, int m) {
    if (e.velocity_arity() > n || e.input_arity() > m) {
        std::ostringstream msg;
        msg << "expression '" << e.to_string() << "' references v[" << e.velocity_arity() - 1 << "] / u["
            << e.input_arity() - 1 << "] but the declared dimensions are n_q=" << n << ", m=" << m;
        throw ValidationError(msg.str());
    }
}

double evaluate(const Expr& e, const Vec& v, const Vec& u) {
    check_inputs(e, v, u);
    return eval_node<double>(e.root(), [&](const Node& n) {
        return n.kind == NodeKind::VelocityVar ? v(n.index) : u(n.index);
    });
}

Gradient eval_with_gradient(const Expr& e, const Vec& v, const Vec& u) {
    check_inputs(e, v, u);
    const Eigen::Index nv = v.size();
    const Eigen::Index count = nv + u.size();
    const Dual d = eval_node<Dual>(e.root(), [&](const Node& n) {
        return n.kind == NodeKind::VelocityVar ? Dual::variable(v(n.index), n.index, count)
                                               : Dual::variable(u(n.index), nv + n.index, count);
    });
    Gradient g;
    g.value = d.value;
    const Vec full = d.grad.size() ? d.grad : Vec::Zero(count);
    g.dv = full.head(nv);
    g.du = full.tail(u.size());
    return g;
}

Mat hessian(const Expr& e, const Vec& v, const Vec& u) {
    const Eigen::Index nv = v.size();
    const Eigen::Index nu = u.size();
    Vec z(nv + nu);
    z << v, u;
    const VectorField grad = [&](const Vec& x) {
        const Gradient g = eval_with_gradient(e, x.head(nv), x.tail(nu));
        Vec out(nv + nu);
        out << g.dv, g.du;
        return out;
    };
    const Mat h = central_difference_jacobian(grad, z, std::cbrt(std::numeric_limits<double>::epsilon()));
    return 0.5 * (h + h.transpose());
}

SystemModel system_from_expressions(std::string name, const std::vector<std::string>& sources, int n_q, int m) {
    if (static_cast<int>(sources.size()) != n_q) {
        std::ostringstream msg;
        msg << "system '" << name << "': expected " << n_q << " velocity expressions, got " << sources.size();
        throw ValidationError(msg.str());
    }
    std::vector<Expr> exprs;
    exprs.reserve(sources.size());
    for (const auto& s : sources) {
        exprs.push_back(parse(s));
        check_dimensions(exprs.back(), n_q, m);
    }
    auto shared = std::make_shared<const std::vector<Expr>>(std::move(exprs));

    auto f = [shared, n_q](const Vec& v, const Vec& u) -> Vec {
        Vec out(n_q);
        for (int i = 0; i < n_q; ++i) out(i) = evaluate((*shared)[static_cast<std::size_t>(i)], v, u);
        return out;
    };
    auto df_dv = [shared, n_q, m](const Vec& v, const Vec& u) -> Mat {
        Mat out(n_q, n_q);
        for (int i = 0; i < n_q; ++i) out.row(i) = eval_with_gradient((*shared)[static_cast<std::size_t>(i)], v, u).dv.transpose();
        return out;
    };
    auto df_du = [shared, n_q, m](const Vec& v, const Vec& u) -> Mat {
        Mat out(n_q, m);
        for (int i = 0; i < n_q; ++i) out.row(i) = eval_with_gradient((*shared)[static_cast<std::size_t>(i)], v, u).du.transpose();
        return out;
    };
    return SystemModel(std::move(name), n_q, m, std::move(f), std::move(df_dv), std::move(df_du));
}

StageCost cost_from_expression(const std::string& source, int n_q, int m) {
    auto e = std::make_shared<const Expr>(parse(source));
    check_dimensions(*e, n_q, m);

    StageCost::Callbacks cb;
    cb.value = [e](const Vec& v, const Vec& u) { return evaluate(*e, v, u); };
    cb.grad_v = [e](const Vec& v, const Vec& u) -> Vec { return eval_with_gradient(*e, v, u).dv; };
    cb.grad_u = [e](const Vec& v, const Vec& u) -> Vec { return eval_with_gradient(*e, v, u).du; };
    cb.hess_vv = [e, n_q](const Vec& v, const Vec& u) -> Mat { return hessian(*e, v, u).topLeftCorner(n_q, n_q); };
    cb.hess_uu = [e, m](const Vec& v, const Vec& u) -> Mat { return hessian(*e, v, u).bottomRightCorner(m, m); };
    cb.hess_vu = [e, n_q, m](const Vec& v, const Vec& u) -> Mat { return hessian(*e, v, u).topRightCorner(n_q, m); };
    return StageCost(e->to_string(), n_q, m, std::move(cb));
}

}  // namespace vturnpike::expr
