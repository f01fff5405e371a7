#include "vturnpike/scenario.hpp"

#include <fstream>
#include <initializer_list>
#include <sstream>

#include "json.hpp"
#include "vturnpike/errors.hpp"
#include "vturnpike/exprlang.hpp"

namespace vturnpike {

using nlohmann::json;

namespace {

std::string join(const std::string& path, const std::string& key) { return path.empty() ? key : path + "." + key; }

[[noreturn]] void fail(const std::string& path, const std::string& what) { throw ValidationError(path + ": " + what); }

void check_keys(const json& j, const std::string& path, std::initializer_list<const char*> allowed) {
    if (!j.is_object()) fail(path.empty() ? "scenario" : path, "expected an object");
    for (const auto& item : j.items()) {
        bool known = false;
        for (const char* a : allowed) known = known || item.key() == a;
        if (!known) {
            std::ostringstream msg;
            msg << "unknown key (allowed:";
            for (const char* a : allowed) msg << ' ' << a;
            msg << ')';
            fail(join(path, item.key()), msg.str());
        }
    }
}

const json* find(const json& j, const char* key) {
    const auto it = j.find(key);
    return it == j.end() ? nullptr : &*it;
}

const json& require(const json& j, const std::string& path, const char* key) {
    const json* v = find(j, key);
    if (v == nullptr) throw ValidationError("missing required key " + join(path, key));
    return *v;
}

double number(const json& j, const std::string& path) {
    if (!j.is_number()) fail(path, "expected a number");
    return j.get<double>();
}

int integer(const json& j, const std::string& path) {
    if (!j.is_number_integer()) fail(path, "expected an integer");
    return j.get<int>();
}

std::string text(const json& j, const std::string& path) {
    if (!j.is_string()) fail(path, "expected a string");
    return j.get<std::string>();
}

// A number is accepted for one-dimensional vectors.
Vec vector(const json& j, const std::string& path) {
    if (j.is_number()) return Vec::Constant(1, j.get<double>());
    if (!j.is_array()) fail(path, "expected a number or an array of numbers");
    Vec v(static_cast<Eigen::Index>(j.size()));
    for (std::size_t i = 0; i < j.size(); ++i) v(static_cast<Eigen::Index>(i)) = number(j[i], path + "[" + std::to_string(i) + "]");
    return v;
}

Vec sized_vector(const json& j, const std::string& path, int n) {
    Vec v = vector(j, path);
    if (v.size() != n) {
        std::ostringstream msg;
        msg << "expected " << n << " entries, found " << v.size();
        fail(path, msg.str());
    }
    return v;
}

Mat matrix(const json& j, const std::string& path, int n) {
    if (j.is_number()) {
        if (n != 1) fail(path, "expected an " + std::to_string(n) + "x" + std::to_string(n) + " matrix");
        return Mat::Constant(1, 1, j.get<double>());
    }
    if (!j.is_array() || static_cast<int>(j.size()) != n) {
        fail(path, "expected an " + std::to_string(n) + "x" + std::to_string(n) + " matrix (array of rows)");
    }
    Mat m(n, n);
    for (int r = 0; r < n; ++r) {
        const Vec row = sized_vector(j[static_cast<std::size_t>(r)], path + "[" + std::to_string(r) + "]", n);
        m.row(r) = row.transpose();
    }
    return m;
}

double positive(const json& j, const std::string& path) {
    const double x = number(j, path);
    if (!(x > 0.0) || !std::isfinite(x)) fail(path, "must be positive and finite");
    return x;
}

double non_negative(const json& j, const std::string& path) {
    const double x = number(j, path);
    if (!(x >= 0.0) || !std::isfinite(x)) fail(path, "must be non-negative and finite");
    return x;
}

struct SystemInfo {
    std::optional<SystemModel> model;
    bool double_integrator_scalar = false;
};

SystemInfo parse_system(const json& j) {
    const std::string path = "system";
    check_keys(j, path, {"builtin", "dim", "damping", "name", "n_q", "m", "f"});
    SystemInfo info;
    const json* builtin = find(j, "builtin");
    const json* f = find(j, "f");
    if ((builtin == nullptr) == (f == nullptr)) fail(path, "give exactly one of 'builtin' or 'f'");
    if (builtin != nullptr) {
        for (const char* k : {"name", "n_q", "m"}) {
            if (find(j, k)) fail(join(path, k), "only valid together with 'f'");
        }
        BuiltinParams params;
        if (const json* d = find(j, "dim")) params.dim = integer(*d, join(path, "dim"));
        if (const json* c = find(j, "damping")) params.damping = number(*c, join(path, "damping"));
        if (params.dim < 1) fail(join(path, "dim"), "must be at least 1");
        const std::string name = text(*builtin, join(path, "builtin"));
        try {
            info.model.emplace(builtin_system(name, params));
        } catch (const LookupError& e) {
            fail(join(path, "builtin"), e.what());
        }
        info.double_integrator_scalar = name == "double_integrator" && params.dim == 1;
        return info;
    }
    for (const char* k : {"dim", "damping"}) {
        if (find(j, k)) fail(join(path, k), "only valid together with 'builtin'");
    }
    const int n = integer(require(j, path, "n_q"), join(path, "n_q"));
    const int m = integer(require(j, path, "m"), join(path, "m"));
    if (n < 1 || m < 1) fail(path, "n_q and m must be at least 1");
    const std::string name = find(j, "name") ? text(j["name"], join(path, "name")) : "expression_system";
    std::vector<std::string> sources;
    if (f->is_string()) {
        sources.push_back(f->get<std::string>());
    } else if (f->is_array()) {
        for (std::size_t i = 0; i < f->size(); ++i) sources.push_back(text((*f)[i], join(path, "f") + "[" + std::to_string(i) + "]"));
    } else {
        fail(join(path, "f"), "expected a string or an array of strings");
    }
    if (static_cast<int>(sources.size()) != n) fail(join(path, "f"), "needs one expression per velocity component");
    try {
        info.model.emplace(expr::system_from_expressions(name, sources, n, m));
    } catch (const SyntaxError& e) {
        fail(join(path, "f"), e.what());
    } catch (const LookupError& e) {
        fail(join(path, "f"), e.what());
    }
    return info;
}

struct CostInfo {
    std::optional<StageCost> cost;
    bool standard = false;  // 1/2 (v^2 + u^2) in one dimension
};

CostInfo parse_cost(const json& j, int n, int m) {
    const std::string path = "cost";
    check_keys(j, path, {"quadratic", "expression"});
    const json* quad = find(j, "quadratic");
    const json* ex = find(j, "expression");
    if ((quad == nullptr) == (ex == nullptr)) fail(path, "give exactly one of 'quadratic' or 'expression'");
    CostInfo info;
    if (quad != nullptr) {
        const std::string qp = join(path, "quadratic");
        check_keys(*quad, qp, {"Qv", "Ru", "v_ref", "u_ref"});
        const Mat Qv = find(*quad, "Qv") ? matrix((*quad)["Qv"], join(qp, "Qv"), n) : Mat::Identity(n, n);
        if (m != n && !find(*quad, "Ru")) fail(join(qp, "Ru"), "required when m differs from n_q");
        Mat Ru = Mat::Identity(m, m);
        if (const json* r = find(*quad, "Ru")) Ru = matrix(*r, join(qp, "Ru"), m);
        const Vec vr = find(*quad, "v_ref") ? sized_vector((*quad)["v_ref"], join(qp, "v_ref"), n) : Vec::Zero(n);
        const Vec ur = find(*quad, "u_ref") ? sized_vector((*quad)["u_ref"], join(qp, "u_ref"), m) : Vec::Zero(m);
        try {
            info.cost.emplace(quadratic_cost(Qv, Ru, vr, ur));
        } catch (const ValidationError& e) {
            fail(qp, e.what());
        }
        info.standard = n == 1 && m == 1 && Qv(0, 0) == 1.0 && Ru(0, 0) == 1.0 && vr(0) == 0.0 && ur(0) == 0.0;
        return info;
    }
    try {
        info.cost.emplace(expr::cost_from_expression(text(*ex, join(path, "expression")), n, m));
    } catch (const SyntaxError& e) {
        fail(join(path, "expression"), e.what());
    } catch (const LookupError& e) {
        fail(join(path, "expression"), e.what());
    } catch (const ValidationError& e) {
        fail(join(path, "expression"), e.what());
    }
    return info;
}

void parse_ocp(const json& j, ScenarioFile& s) {
    const std::string path = "ocp";
    check_keys(j, path, {"T", "T_sweep", "q0", "v0", "qT", "vT", "N", "bounds"});
    const int n = s.system.n_q();
    const int m = s.system.m();
    const json* T = find(j, "T");
    const json* sweep = find(j, "T_sweep");
    if (T == nullptr && sweep == nullptr) throw ValidationError("missing required key ocp.T (or ocp.T_sweep)");
    if (T != nullptr) s.T = positive(*T, join(path, "T"));
    if (sweep != nullptr) {
        const std::string sp = join(path, "T_sweep");
        if (!sweep->is_array() || sweep->empty()) fail(sp, "expected a non-empty array of horizons");
        for (std::size_t i = 0; i < sweep->size(); ++i) {
            const std::string ep = sp + "[" + std::to_string(i) + "]";
            const double h = number((*sweep)[i], ep);
            if (!(h > 0.0) || !std::isfinite(h)) {
                std::ostringstream msg;
                msg << "horizon must be positive and finite (got " << h << ")";
                fail(ep, msg.str());
            }
            s.T_sweep.push_back(h);
        }
    }
    s.q0 = sized_vector(require(j, path, "q0"), join(path, "q0"), n);
    s.v0 = sized_vector(require(j, path, "v0"), join(path, "v0"), n);
    s.qT = sized_vector(require(j, path, "qT"), join(path, "qT"), n);
    s.vT = sized_vector(require(j, path, "vT"), join(path, "vT"), n);
    if (const json* N = find(j, "N")) {
        s.N = integer(*N, join(path, "N"));
        if (s.N < 2) fail(join(path, "N"), "must be at least 2");
    }
    if (const json* b = find(j, "bounds")) {
        const std::string bp = join(path, "bounds");
        check_keys(*b, bp, {"v_lo", "v_hi", "u_lo", "u_hi"});
        Box box;
        if (find(*b, "v_lo")) box.v_lo = sized_vector((*b)["v_lo"], join(bp, "v_lo"), n);
        if (find(*b, "v_hi")) box.v_hi = sized_vector((*b)["v_hi"], join(bp, "v_hi"), n);
        if (find(*b, "u_lo")) box.u_lo = sized_vector((*b)["u_lo"], join(bp, "u_lo"), m);
        if (find(*b, "u_hi")) box.u_hi = sized_vector((*b)["u_hi"], join(bp, "u_hi"), m);
        s.bounds = box;
    }
}

TurnpikeSection parse_turnpike(const json& j) {
    const std::string path = "turnpike";
    check_keys(j, path, {"eps_grid", "nu_bar", "delta_exact"});
    TurnpikeSection t;
    if (const json* e = find(j, "eps_grid")) {
        const std::string ep = join(path, "eps_grid");
        if (!e->is_array() || e->empty()) fail(ep, "expected a non-empty array of numbers");
        t.eps_grid.clear();
        for (std::size_t i = 0; i < e->size(); ++i) t.eps_grid.push_back(non_negative((*e)[i], ep + "[" + std::to_string(i) + "]"));
    }
    if (const json* v = find(j, "nu_bar")) t.nu_bar = non_negative(*v, join(path, "nu_bar"));
    if (const json* d = find(j, "delta_exact")) t.delta_exact = positive(*d, join(path, "delta_exact"));
    return t;
}

DissipativitySection parse_dissipativity(const json& j, int n) {
    const std::string path = "dissipativity";
    check_keys(j, path, {"storage", "alpha_a", "T0", "TT"});
    DissipativitySection d;
    if (const json* s = find(j, "storage")) {
        const std::string sp = join(path, "storage");
        if (s->is_string()) {
            if (s->get<std::string>() != "zero") fail(sp, "expected \"zero\" or {\"P\": matrix}");
        } else {
            check_keys(*s, sp, {"P", "center"});
            const Mat P = matrix(require(*s, sp, "P"), join(sp, "P"), 2 * n);
            const Vec c = find(*s, "center") ? sized_vector((*s)["center"], join(sp, "center"), 2 * n) : Vec::Zero(2 * n);
            try {
                d.storage = StorageSpec::quadratic(P, c);
            } catch (const ValidationError& e) {
                fail(sp, e.what());
            }
        }
    }
    if (const json* a = find(j, "alpha_a")) {
        const std::string ap = join(path, "alpha_a");
        if (a->is_string()) {
            if (a->get<std::string>() != "fit") fail(ap, "expected a number or \"fit\"");
        } else {
            d.alpha_a = non_negative(*a, ap);
        }
    }
    if (const json* t = find(j, "T0")) d.reach_time_in = non_negative(*t, join(path, "T0"));
    if (const json* t = find(j, "TT")) d.reach_time_out = non_negative(*t, join(path, "TT"));
    return d;
}

void parse_steady(const json& j, ScenarioFile& s) {
    const std::string path = "steady";
    check_keys(j, path, {"v_guess", "u_guess", "lambda_guess"});
    const int n = s.system.n_q();
    if (find(j, "v_guess")) s.steady.v_guess = sized_vector(j["v_guess"], join(path, "v_guess"), n);
    if (find(j, "u_guess")) s.steady.u_guess = sized_vector(j["u_guess"], join(path, "u_guess"), s.system.m());
    if (find(j, "lambda_guess")) s.steady.lambda_guess = sized_vector(j["lambda_guess"], join(path, "lambda_guess"), n);
}

void parse_solver(const json& j, ScenarioFile& s) {
    const std::string path = "solver";
    check_keys(j, path, {"tol_residual", "max_iter", "segment_length", "warm_start_fallback"});
    if (const json* t = find(j, "tol_residual")) s.newton.tol_residual = positive(*t, join(path, "tol_residual"));
    if (const json* it = find(j, "max_iter")) {
        s.newton.max_iter = integer(*it, join(path, "max_iter"));
        if (s.newton.max_iter < 1) fail(join(path, "max_iter"), "must be at least 1");
    }
    if (const json* l = find(j, "segment_length")) s.indirect.segment_length = positive(*l, join(path, "segment_length"));
    if (const json* w = find(j, "warm_start_fallback")) {
        if (!w->is_boolean()) fail(join(path, "warm_start_fallback"), "expected true or false");
        s.indirect.warm_start_fallback = w->get<bool>();
    }
}

}  // namespace

OcpSpec ScenarioFile::ocp(double horizon) const {
    OcpSpec spec{system, cost, horizon, q0, v0, qT, vT, N, bounds};
    spec.validate();
    return spec;
}

std::vector<double> ScenarioFile::horizons() const {
    if (!T_sweep.empty()) return T_sweep;
    return {*T};
}

ScenarioFile parse_scenario(const std::string& source) {
    json doc;
    try {
        doc = json::parse(source);
    } catch (const json::parse_error& e) {
        throw ValidationError(std::string("scenario is not valid JSON: ") + e.what());
    }
    check_keys(doc, "", {"description", "system", "cost", "ocp", "turnpike", "dissipativity", "steady", "solver"});
    if (const json* d = find(doc, "description")) text(*d, "description");

    SystemInfo sys = parse_system(require(doc, "", "system"));
    const int n = sys.model->n_q();
    const int m = sys.model->m();
    CostInfo cost = parse_cost(require(doc, "", "cost"), n, m);

    ScenarioFile s(std::move(*sys.model), std::move(*cost.cost));
    s.closed_form = sys.double_integrator_scalar && cost.standard;
    parse_ocp(require(doc, "", "ocp"), s);
    if (const json* t = find(doc, "turnpike")) s.turnpike = parse_turnpike(*t);
    if (const json* d = find(doc, "dissipativity")) s.dissipativity = parse_dissipativity(*d, n);
    if (const json* st = find(doc, "steady")) parse_steady(*st, s);
    if (const json* so = find(doc, "solver")) parse_solver(*so, s);
    return s;
}

ScenarioFile load_scenario(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw IoError("cannot open scenario '" + path + "'");
    std::ostringstream buf;
    buf << is.rdbuf();
    return parse_scenario(buf.str());
}

}  // namespace vturnpike
