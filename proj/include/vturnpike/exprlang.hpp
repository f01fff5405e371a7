#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "vturnpike/model.hpp"
#include "vturnpike/numerics.hpp"

namespace vturnpike::expr {

enum class NodeKind { Number, VelocityVar, InputVar, Negate, Add, Sub, Mul, Div, Pow, Call };

enum class Function { Sin, Cos, Exp, Sinh, Cosh, Tanh, Abs };

struct Node {
    NodeKind kind = NodeKind::Number;
    double number = 0.0;     // Number
    int index = 0;           // VelocityVar / InputVar
    Function function = Function::Sin;
    std::vector<std::shared_ptr<const Node>> children;
};

/// Immutable arithmetic expression over v[i] and u[j].
///
/// Grammar (lowest to highest precedence):
///   sum     := product (('+' | '-') product)*
///   product := unary (('*' | '/') unary)*
///   unary   := '-' unary | power
///   power   := atom ('^' unary)?            right associative
///   atom    := number | v[i] | u[j] | func '(' sum ')' | '(' sum ')'
class Expr {
public:
    explicit Expr(std::shared_ptr<const Node> root) : root_(std::move(root)) {}

    const Node& root() const { return *root_; }
    std::string to_string() const;

    /// Largest referenced index + 1 for v and u (0 when unused).
    int velocity_arity() const;
    int input_arity() const;

    friend bool operator==(const Expr& a, const Expr& b);

private:
    std::shared_ptr<const Node> root_;
};

/// Parses `source`; throws SyntaxError (with line/column) or LookupError for
/// identifiers other than v, u and the supported functions.
Expr parse(std::string_view source);

/// Throws ValidationError if e references v[i] with i >= n or u[j] with j >= m.
void check_dimensions(const Expr& e, int n, int m);

double evaluate(const Expr& e, const Vec& v, const Vec& u);

struct Gradient {
    double value = 0.0;
    Vec dv;
    Vec du;
};

/// Value and exact forward-mode partials. Throws DomainError naming the
/// offending subexpression on division by zero or non-finite results.
Gradient eval_with_gradient(const Expr& e, const Vec& v, const Vec& u);

/// Hessian w.r.t. (v, u) by central differences of the forward-mode
/// gradient, step h_j = eps^(1/3) (1 + |x_j|).
Mat hessian(const Expr& e, const Vec& v, const Vec& u);

/// System whose i-th velocity derivative is sources[i].
SystemModel system_from_expressions(std::string name, const std::vector<std::string>& sources, int n_q, int m);

StageCost cost_from_expression(const std::string& source, int n_q, int m);

}  // namespace vturnpike::expr
