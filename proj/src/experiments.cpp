#include "fockchaos/experiments.hpp"

#include <Eigen/Core>
#include <json.hpp>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "fockchaos/meanfield.hpp"
#include "fockchaos/quantum.hpp"
#include "fockchaos/rwm.hpp"
#include "fockchaos/spectral.hpp"
#include "fockchaos/twa.hpp"

namespace fockchaos {

using json = nlohmann::json;

const char *library_version() { return "1.0.0"; }

std::uint64_t fnv1a64(const std::string &s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

void ResultTable::add(std::vector<Cell> row) {
    if (row.size() != columns.size())
        throw DimensionError("row width differs from the column count of table " + name);
    rows.push_back(std::move(row));
}

namespace {

// ---- schema reader --------------------------------------------------------
// Records problems instead of throwing so validation can list all of them.

struct Reader {
    std::vector<ConfigIssue> issues;

    void fail(const std::string &path, const std::string &msg, bool capacity = false) {
        issues.push_back({path, msg, capacity});
    }
};

std::string join(const std::string &path, const std::string &key) { return path.empty() ? key : path + "." + key; }

class Obj {
public:
    Obj(Reader &r, const json *j, std::string path) : r_(r), j_(j), path_(std::move(path)) {
        if (j_ && !j_->is_object()) {
            r_.fail(path_, "must be an object");
            j_ = nullptr;
        }
    }
    ~Obj() = default;
    Obj(const Obj &) = delete;

    bool present() const { return j_ != nullptr; }
    bool has(const std::string &k) const { return j_ && j_->contains(k); }
    std::string path(const std::string &k) const { return join(path_, k); }

    const json *raw(const std::string &k) {
        used_.insert(k);
        if (!j_ || !j_->contains(k))
            return nullptr;
        return &(*j_)[k];
    }

    double num(const std::string &k, std::optional<double> def = std::nullopt) {
        auto v = raw(k);
        if (!v) {
            if (!def)
                r_.fail(path(k), "required field is missing");
            return def.value_or(0.0);
        }
        if (!v->is_number()) {
            r_.fail(path(k), "must be a number");
            return def.value_or(0.0);
        }
        double x = v->get<double>();
        if (!std::isfinite(x))
            r_.fail(path(k), "must be finite");
        return x;
    }

    long long integer(const std::string &k, std::optional<long long> def = std::nullopt) {
        auto v = raw(k);
        if (!v) {
            if (!def)
                r_.fail(path(k), "required field is missing");
            return def.value_or(0);
        }
        if (!v->is_number_integer()) {
            r_.fail(path(k), "must be an integer");
            return def.value_or(0);
        }
        return v->get<long long>();
    }

    bool boolean(const std::string &k, bool def) {
        auto v = raw(k);
        if (!v)
            return def;
        if (!v->is_boolean()) {
            r_.fail(path(k), "must be true or false");
            return def;
        }
        return v->get<bool>();
    }

    std::string str(const std::string &k, std::optional<std::string> def = std::nullopt) {
        auto v = raw(k);
        if (!v) {
            if (!def)
                r_.fail(path(k), "required field is missing");
            return def.value_or("");
        }
        if (!v->is_string()) {
            r_.fail(path(k), "must be a string");
            return def.value_or("");
        }
        return v->get<std::string>();
    }

    std::vector<double> numbers(const std::string &k, std::optional<std::vector<double>> def = std::nullopt) {
        auto v = raw(k);
        if (!v) {
            if (!def)
                r_.fail(path(k), "required field is missing");
            return def.value_or(std::vector<double>{});
        }
        std::vector<double> out;
        if (!v->is_array()) {
            r_.fail(path(k), "must be an array of numbers");
            return out;
        }
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (!(*v)[i].is_number()) {
                r_.fail(path(k) + "[" + std::to_string(i) + "]", "must be a number");
                continue;
            }
            out.push_back((*v)[i].get<double>());
        }
        return out;
    }

    std::vector<int> integers(const std::string &k, std::optional<std::vector<int>> def = std::nullopt) {
        auto v = raw(k);
        if (!v) {
            if (!def)
                r_.fail(path(k), "required field is missing");
            return def.value_or(std::vector<int>{});
        }
        std::vector<int> out;
        if (!v->is_array()) {
            r_.fail(path(k), "must be an array of integers");
            return out;
        }
        for (std::size_t i = 0; i < v->size(); ++i) {
            if (!(*v)[i].is_number_integer()) {
                r_.fail(path(k) + "[" + std::to_string(i) + "]", "must be an integer");
                continue;
            }
            out.push_back((*v)[i].get<int>());
        }
        return out;
    }

    // amplitudes as numbers (real) or [re, im] pairs
    CVec complexes(const std::string &k) {
        auto v = raw(k);
        CVec out;
        if (!v) {
            r_.fail(path(k), "required field is missing");
            return out;
        }
        if (!v->is_array()) {
            r_.fail(path(k), "must be an array of numbers or [re, im] pairs");
            return out;
        }
        for (std::size_t i = 0; i < v->size(); ++i) {
            const auto &e = (*v)[i];
            std::string p = path(k) + "[" + std::to_string(i) + "]";
            if (e.is_number()) {
                out.emplace_back(e.get<double>(), 0.0);
            } else if (e.is_array() && e.size() == 2 && e[0].is_number() && e[1].is_number()) {
                out.emplace_back(e[0].get<double>(), e[1].get<double>());
            } else {
                r_.fail(p, "must be a number or a [re, im] pair");
            }
        }
        return out;
    }

    void finish() {
        if (!j_)
            return;
        for (auto it = j_->begin(); it != j_->end(); ++it)
            if (!used_.count(it.key()))
                r_.fail(path(it.key()), "unknown key");
    }

private:
    Reader &r_;
    const json *j_;
    std::string path_;
    std::set<std::string> used_;
};

// ---- plan -----------------------------------------------------------------

struct StateSpec {
    std::string kind; // coherent | coherent_sector | fock
    CVec amplitudes;
    int N = -1;
    std::vector<int> occupations;
};

struct AutocorrPlan {
    double tol = 1e-10, k_sigma = 5;
    long long twa_samples = 0;
    bool weyl = true;
    bool spectrum = false;
    double sp_eta = 0.1, sp_E0 = 0, sp_E1 = 1;
    long long sp_points = 0;
};

struct CbsPlan {
    std::vector<double> phi{0.0};
    CbsOptions opt;
};

struct RwmPlan {
    int N = 0;
    double eta = 1;
    std::optional<double> E; // median of the spectrum when absent
    std::vector<int> seed_state;
    int radius = 2;
    long long dos_samples = 100000;
    int q_max = 12;
    bool exact_density = false;
};

struct OtocPlan {
    std::vector<double> V, W;
    double tol = 1e-9;
    bool fixed_point = true;
    double lyapunov_T = 200;
};

struct SpectraPlan {
    int N = 0;
    double disorder = 0.1;
    long long realizations = 20;
    std::vector<double> tau;
    double smoothing = 0.05;
    UnfoldOptions unfold;
};

struct LyapunovPlan {
    double T = 200, renorm_dt = 0.5;
    int blocks = 10;
    bool fixed_point = false;
};

struct Plan {
    ExperimentConfig cfg;
    StateSpec state;
    std::vector<double> times;
    AutocorrPlan autocorr;
    CbsPlan cbs;
    RwmPlan rwm;
    OtocPlan otoc;
    SpectraPlan spectra;
    LyapunovPlan lyapunov;
};

const std::set<std::string> experiment_ids{"autocorr", "cbs", "rwm", "otoc", "spectra", "lyapunov"};

std::vector<double> read_grid(Reader &r, const json *j, const std::string &path, bool required) {
    std::vector<double> t;
    if (!j) {
        if (required)
            r.fail(path, "required field is missing");
        return t;
    }
    Obj o(r, j, path);
    if (!o.present())
        return t;
    if (o.has("points")) {
        t = o.numbers("points");
        for (std::size_t i = 1; i < t.size(); ++i)
            if (!(t[i] > t[i - 1])) {
                r.fail(o.path("points"), "times must be strictly increasing");
                break;
            }
    } else {
        double a = o.num("t0", 0.0), b = o.num("t1");
        long long n = o.integer("steps");
        if (n < 2 || n > 10000000)
            r.fail(o.path("steps"), "must lie in [2, 1e7]");
        else if (!(b > a))
            r.fail(o.path("t1"), "must exceed t0");
        else
            t = uniform_grid(a, b, static_cast<std::size_t>(n));
    }
    o.finish();
    if (t.empty() && r.issues.empty())
        r.fail(path, "empty grid");
    return t;
}

Plan read_plan(const std::string &text, Reader &r) {
    Plan plan;
    json root;
    try {
        root = json::parse(text);
    } catch (const json::parse_error &e) {
        r.fail("", std::string("not valid JSON: ") + e.what());
        return plan;
    }
    plan.cfg.canonical = root.dump();
    Obj top(r, &root, "");
    if (!top.present())
        return plan;

    long long ver = top.integer("schema_version");
    if (top.has("schema_version") && ver != config_schema_version)
        r.fail("schema_version", "unsupported version " + std::to_string(ver) + ", expected " +
                                     std::to_string(config_schema_version));
    auto &id = plan.cfg.experiment;
    id = top.str("experiment");
    if (top.has("experiment") && !experiment_ids.count(id))
        r.fail("experiment", "unknown experiment '" + id + "'");
    long long seed = top.integer("seed", 1);
    if (seed < 0)
        r.fail("seed", "must be non-negative");
    plan.cfg.seed = static_cast<std::uint64_t>(seed);
    plan.cfg.output_dir = top.str("output", std::string("."));

    {
        Obj lat(r, top.raw("lattice"), "lattice");
        if (!lat.present())
            r.fail("lattice", "required field is missing");
        auto &p = plan.cfg.lattice;
        long long L = lat.integer("L");
        if (lat.has("L") && (L < 1 || L > 64))
            r.fail("lattice.L", "must lie in [1, 64]");
        p.L = static_cast<int>(L);
        p.J = lat.num("J");
        p.U = lat.num("U");
        p.phi = lat.num("phi", 0.0);
        p.eps = lat.numbers("eps", std::vector<double>{});
        if (!p.eps.empty() && static_cast<long long>(p.eps.size()) != L)
            r.fail("lattice.eps", "needs exactly L entries");
        std::string geo = lat.str("geometry", std::string("ring"));
        if (geo == "ring")
            p.geometry = Geometry::ring;
        else if (geo == "open_chain")
            p.geometry = Geometry::open_chain;
        else
            r.fail("lattice.geometry", "must be 'ring' or 'open_chain'");
        lat.finish();
    }
    const int L = plan.cfg.lattice.L;

    if (auto s = top.raw("state")) {
        Obj st(r, s, "state");
        auto &spec = plan.state;
        spec.kind = st.str("kind");
        if (spec.kind == "coherent" || spec.kind == "coherent_sector") {
            spec.amplitudes = st.complexes("amplitudes");
            if (static_cast<int>(spec.amplitudes.size()) != L && st.has("amplitudes"))
                r.fail("state.amplitudes", "needs exactly L entries");
            if (spec.kind == "coherent_sector") {
                spec.N = static_cast<int>(st.integer("N"));
                if (spec.N < 0)
                    r.fail("state.N", "must be non-negative");
            }
        } else if (spec.kind == "fock") {
            spec.occupations = st.integers("occupations");
            if (static_cast<int>(spec.occupations.size()) != L && st.has("occupations"))
                r.fail("state.occupations", "needs exactly L entries");
            for (int n : spec.occupations)
                if (n < 0 || n > 255) {
                    r.fail("state.occupations", "entries must lie in [0, 255]");
                    break;
                }
        } else if (st.has("kind")) {
            r.fail("state.kind", "must be 'coherent', 'coherent_sector' or 'fock'");
        }
        st.finish();
    }

    const bool timed = id == "autocorr" || id == "otoc";
    plan.times = read_grid(r, top.raw("time"), "time", timed);

    auto need_state = [&](std::initializer_list<const char *> kinds) {
        if (plan.state.kind.empty()) {
            r.fail("state", "required field is missing");
            return;
        }
        for (auto k : kinds)
            if (plan.state.kind == k)
                return;
        std::string allowed;
        for (auto k : kinds)
            allowed += std::string(allowed.empty() ? "" : ", ") + k;
        r.fail("state.kind", "experiment " + id + " accepts: " + allowed);
    };

    // experiment sections are optional and only the one matching the id may appear
    for (const auto &other : experiment_ids)
        if (other != id && top.has(other))
            r.fail(other, "section does not belong to experiment " + id);

    if (id == "autocorr") {
        need_state({"coherent"});
        Obj s(r, top.raw("autocorr"), "autocorr");
        auto &a = plan.autocorr;
        a.tol = s.num("tol", 1e-10);
        a.k_sigma = s.num("k_sigma", 5.0);
        a.twa_samples = s.integer("twa_samples", 0);
        a.weyl = s.boolean("weyl_symbol", true);
        if (a.twa_samples < 0)
            r.fail("autocorr.twa_samples", "must be non-negative");
        if (auto sp = s.raw("spectrum")) {
            Obj o(r, sp, "autocorr.spectrum");
            a.spectrum = true;
            a.sp_eta = o.num("eta");
            a.sp_E0 = o.num("E0");
            a.sp_E1 = o.num("E1");
            a.sp_points = o.integer("points");
            if (a.sp_points < 2)
                r.fail("autocorr.spectrum.points", "must be at least 2");
            o.finish();
        }
        s.finish();
    } else if (id == "cbs") {
        need_state({"fock"});
        Obj s(r, top.raw("cbs"), "cbs");
        auto &c = plan.cbs;
        c.phi = s.numbers("phi", std::vector<double>{0.0});
        c.opt.t_start = s.num("t_start", 20.0);
        c.opt.t_end = s.num("t_end", 40.0);
        c.opt.n_times = static_cast<std::size_t>(std::max(0LL, s.integer("n_times", 201)));
        c.opt.shell_width = s.num("shell_width", 0.5);
        c.opt.exclude_images = s.boolean("exclude_images", true);
        c.opt.tol = s.num("tol", 1e-9);
        if (c.phi.empty())
            r.fail("cbs.phi", "needs at least one phase");
        s.finish();
    } else if (id == "rwm") {
        Obj s(r, top.raw("rwm"), "rwm");
        if (!s.present())
            r.fail("rwm", "required field is missing");
        auto &w = plan.rwm;
        w.N = static_cast<int>(s.integer("N"));
        w.eta = s.num("eta", 1.0);
        if (s.has("E"))
            w.E = s.num("E");
        w.seed_state = s.integers("seed_state");
        w.radius = static_cast<int>(s.integer("radius", 2));
        w.dos_samples = s.integer("dos_samples", 100000);
        w.q_max = static_cast<int>(s.integer("q_max", 12));
        std::string norm = s.str("normalization", std::string("classical"));
        if (norm == "exact")
            w.exact_density = true;
        else if (norm != "classical")
            r.fail("rwm.normalization", "must be 'classical' or 'exact'");
        if (!(w.eta > 0))
            r.fail("rwm.eta", "must be positive");
        if (w.dos_samples < 10000)
            r.fail("rwm.dos_samples", "must be at least 10000");
        if (s.has("seed_state")) {
            int tot = 0;
            for (int x : w.seed_state)
                tot += x;
            if (static_cast<int>(w.seed_state.size()) != L)
                r.fail("rwm.seed_state", "needs exactly L entries");
            else if (tot != w.N)
                r.fail("rwm.seed_state", "occupations must add up to N");
        }
        s.finish();
    } else if (id == "otoc") {
        need_state({"coherent", "coherent_sector"});
        Obj s(r, top.raw("otoc"), "otoc");
        auto &o = plan.otoc;
        std::vector<double> v0(static_cast<std::size_t>(std::max(L, 0)), 0.0), w0 = v0;
        if (L >= 1)
            v0[0] = 1;
        if (L >= 2)
            w0[1] = 1;
        o.V = s.numbers("V", v0);
        o.W = s.numbers("W", w0);
        if (static_cast<int>(o.V.size()) != L)
            r.fail("otoc.V", "needs exactly L site weights");
        if (static_cast<int>(o.W.size()) != L)
            r.fail("otoc.W", "needs exactly L site weights");
        o.tol = s.num("tol", 1e-9);
        o.fixed_point = s.boolean("fixed_point", true);
        o.lyapunov_T = s.num("lyapunov_T", 200.0);
        s.finish();
    } else if (id == "spectra") {
        Obj s(r, top.raw("spectra"), "spectra");
        if (!s.present())
            r.fail("spectra", "required field is missing");
        auto &sp = plan.spectra;
        sp.N = static_cast<int>(s.integer("N"));
        sp.disorder = s.num("disorder", 0.1);
        sp.realizations = s.integer("realizations", 20);
        sp.smoothing = s.num("smoothing", 0.05);
        sp.tau = read_grid(r, s.raw("tau"), "spectra.tau", false);
        if (sp.tau.empty() && !s.has("tau"))
            sp.tau = uniform_grid(0.05, 2.0, 79);
        std::string how = s.str("unfold", std::string("gaussian"));
        if (how == "gaussian")
            sp.unfold.method = UnfoldMethod::gaussian_counting;
        else if (how == "polynomial")
            sp.unfold.method = UnfoldMethod::polynomial;
        else
            r.fail("spectra.unfold", "must be 'gaussian' or 'polynomial'");
        sp.unfold.sigma_spacings = s.num("sigma_spacings", 8.0);
        sp.unfold.degree = static_cast<int>(s.integer("degree", 9));
        sp.unfold.trim = s.num("trim", 0.05);
        if (sp.realizations < 10)
            r.fail("spectra.realizations", "form factor averaging needs at least 10");
        if (sp.disorder < 0)
            r.fail("spectra.disorder", "must be non-negative");
        for (double t : sp.tau)
            if (!(t > 0 && t <= 4)) {
                r.fail("spectra.tau", "values must lie in (0, 4]");
                break;
            }
        s.finish();
    } else if (id == "lyapunov") {
        need_state({"coherent"});
        Obj s(r, top.raw("lyapunov"), "lyapunov");
        auto &l = plan.lyapunov;
        l.T = s.num("T", 200.0);
        l.renorm_dt = s.num("renorm_dt", 0.5);
        l.blocks = static_cast<int>(s.integer("blocks", 10));
        l.fixed_point = s.boolean("fixed_point", false);
        if (!(l.T > 0))
            r.fail("lyapunov.T", "must be positive");
        s.finish();
    }
    top.finish();

    // physics sanity once the schema is clean
    if (!r.issues.empty())
        return plan;
    try {
        plan.cfg.lattice.validate();
    } catch (const Error &e) {
        r.fail("lattice", e.what());
        return plan;
    }
    auto check_dim = [&](const std::string &path, int Lx, int N, std::size_t cap) {
        try {
            auto d = sector_dimension(Lx, N);
            if (d > cap)
                r.fail(path, "sector (L=" + std::to_string(Lx) + ", N=" + std::to_string(N) + ") has dimension " +
                                 std::to_string(d) + " above the cap " + std::to_string(cap),
                       true);
        } catch (const CapacityError &e) {
            r.fail(path, e.what(), true);
        }
        if (N > 255)
            r.fail(path, "at most 255 particles per sector", true);
    };
    const DenseCaps caps;
    if (id == "cbs" || plan.state.kind == "fock") {
        int N = 0;
        for (int n : plan.state.occupations)
            N += n;
        check_dim("state.occupations", L, N, default_basis_cap);
    }
    if (plan.state.kind == "coherent_sector")
        check_dim("state.N", L, plan.state.N, default_basis_cap);
    if (plan.state.kind == "coherent" && id != "lyapunov") {
        double nbar = 0;
        for (auto b : plan.state.amplitudes)
            nbar += std::norm(b);
        int top_N = static_cast<int>(std::ceil(nbar + plan.autocorr.k_sigma * std::sqrt(nbar)));
        check_dim("state.amplitudes", L, top_N, default_basis_cap);
    }
    if (id == "rwm")
        check_dim("rwm.N", L, plan.rwm.N, caps.with_vectors);
    if (id == "spectra")
        check_dim("spectra.N", L, plan.spectra.N, caps.values_only);
    if (id == "autocorr" && plan.autocorr.spectrum) {
        try {
            check_uniform_grid(plan.times);
        } catch (const Error &e) {
            r.fail("time", std::string("spectrum needs a uniform grid: ") + e.what());
        }
        if (std::abs(plan.times.front()) > 0)
            r.fail("time.t0", "spectrum needs a grid starting at t = 0");
    }
    if (id == "rwm" && plan.rwm.E) {
        // window centre inside a crude spectral span
        double nmax = plan.rwm.N;
        double span = 2 * std::abs(plan.cfg.lattice.J) * nmax * 2 + 0.5 * std::abs(plan.cfg.lattice.U) * nmax * nmax;
        for (int j = 0; j < L; ++j)
            span += std::abs(plan.cfg.lattice.eps_at(j)) * nmax;
        if (std::abs(*plan.rwm.E) > span)
            r.fail("rwm.E", "window centre lies outside the spectral span");
    }
    return plan;
}

Plan parse_plan(const std::string &text) {
    Reader r;
    Plan p = read_plan(text, r);
    if (!r.issues.empty()) {
        const auto &i = r.issues.front();
        std::string msg = (i.path.empty() ? std::string("config") : i.path) + ": " + i.message;
        if (i.capacity)
            throw CapacityError(msg);
        throw ConfigError(msg);
    }
    return p;
}

std::string occ_label(const std::vector<int> &n) {
    std::string s;
    for (std::size_t i = 0; i < n.size(); ++i)
        s += (i ? "-" : "") + std::to_string(n[i]);
    return s;
}

// ---- runners --------------------------------------------------------------

void run_autocorr(const Plan &P, RunOutput &out) {
    const auto &p = P.cfg.lattice;
    const auto &a = P.autocorr;
    CoherentOptions co;
    co.k_sigma = a.k_sigma;
    auto st = coherent_state(p.L, P.state.amplitudes, co);
    if (st.warning) {
        char buf[160];
        std::snprintf(buf, sizeof buf, "coherent state truncation weight %.3g exceeds the warning level",
                      st.truncated_weight);
        out.notes.push_back(buf);
    }
    auto ac = autocorrelation(p, st, P.times, a.tol);
    TwaSeries tw;
    if (a.twa_samples > 0) {
        TwaOptions to;
        to.weyl_hamiltonian = a.weyl;
        tw = twa_return(P.state.amplitudes, p, P.times, static_cast<std::size_t>(a.twa_samples), P.cfg.seed, to);
        out.notes.push_back(a.weyl ? "TWA flow uses the Weyl symbol of the Hamiltonian"
                                   : "TWA flow uses the plain mean-field Hamiltonian");
    }
    ResultTable t{"autocorr", {"t", "C_exact", "C_twa", "C_twa_stderr", "A_re", "A_im"}, {}};
    for (std::size_t k = 0; k < P.times.size(); ++k) {
        double ct = a.twa_samples > 0 ? tw.mean[k] : std::nan("");
        double ce = a.twa_samples > 0 ? tw.stderr_[k] : std::nan("");
        t.add({P.times[k], ac.probability[k], ct, ce, ac.amplitude.value[k].real(), ac.amplitude.value[k].imag()});
    }
    out.tables.push_back(std::move(t));
    if (a.spectrum) {
        auto E = uniform_grid(a.sp_E0, a.sp_E1, static_cast<std::size_t>(a.sp_points));
        auto sp = weighted_spectrum(ac.amplitude, a.sp_eta, E);
        ResultTable s{"autocorr_spectrum", {"E", "SP"}, {}};
        for (std::size_t k = 0; k < E.size(); ++k)
            s.add({sp.E[k], sp.weight[k]});
        out.tables.push_back(std::move(s));
    }
}

void run_cbs(const Plan &P, RunOutput &out) {
    auto pts = cbs_experiment(P.cfg.lattice, P.state.occupations, P.cbs.phi, P.cbs.opt);
    ResultTable t{"cbs",
                  {"phi", "g", "background", "n_window_times", "return_probability", "background_states", "drift"},
                  {}};
    for (const auto &c : pts)
        t.add({c.phi, c.g, c.background, static_cast<long long>(c.n_window_times), c.return_probability,
               static_cast<long long>(c.background_states), c.drift});
    out.tables.push_back(std::move(t));
}

void run_rwm(const Plan &P, RunOutput &out) {
    const auto &p = P.cfg.lattice;
    const auto &w = P.rwm;
    auto basis = build_basis(p.L, w.N);
    auto spec = diagonalize(assemble_hamiltonian(basis, p), true);
    double E = 0;
    if (w.E) {
        E = *w.E;
    } else {
        auto v = spec.values;
        std::nth_element(v.begin(), v.begin() + static_cast<long>(v.size() / 2), v.end());
        E = v[v.size() / 2];
    }
    SpectralWindow win{E, w.eta};
    auto states = occupation_ball(w.seed_state, w.radius);
    ExactCovarianceInfo info;
    auto ex = exact_covariance(spec, basis, win, states, &info);
    if (info.warning)
        out.notes.push_back("fewer than 50 eigenstates inside the window");
    auto dos = classical_dos(p, w.N, win, static_cast<std::size_t>(w.dos_samples), P.cfg.seed);
    const double rho_cl = dos.value * static_cast<double>(basis.size());
    const double rho = w.exact_density ? info.window_weight : rho_cl;
    SemiclassicalOptions so;
    so.q_max = w.q_max;
    int qmax = 0;
    auto sc = semiclassical_covariance_matrix(states, p, win, rho, so, &qmax);
    auto ce = normalized_correlator(ex), cs = normalized_correlator(sc);
    if (cs.exceeds_one)
        out.notes.push_back("semiclassical normalized correlator exceeds 1 in magnitude (not clipped)");

    const std::size_t S = states.size();
    ResultTable pairs{"rwm_pairs",
                      {"a", "b", "state_a", "state_b", "C_exact_re", "C_exact_im", "C_sc_re", "C_sc_im"},
                      {}};
    ResultTable diag{"rwm_diagonal", {"a", "state", "R_exact", "R_sc"}, {}};
    std::vector<double> xe, xs, de, ds;
    for (std::size_t i = 0; i < S; ++i) {
        diag.add({static_cast<long long>(i), occ_label(states[i]), ex.at(i, i).real(), sc.at(i, i).real()});
        de.push_back(ex.at(i, i).real());
        ds.push_back(sc.at(i, i).real());
        for (std::size_t j = i + 1; j < S; ++j) {
            cplx a = ce.C[i * S + j], b = cs.C[i * S + j];
            pairs.add({static_cast<long long>(i), static_cast<long long>(j), occ_label(states[i]),
                       occ_label(states[j]), a.real(), a.imag(), b.real(), b.imag()});
            xe.push_back(a.real());
            xs.push_back(b.real());
        }
    }
    ResultTable sum{"rwm_summary",
                    {"E", "eta", "window_weight", "states_in_window", "rho_cl", "rho_cl_stderr", "pairs",
                     "pearson_offdiag", "pearson_diag", "max_q", "sc_max_abs"},
                    {}};
    sum.add({E, w.eta, info.window_weight, static_cast<long long>(info.states_in_window), rho_cl,
             dos.stderr_ * static_cast<double>(basis.size()), static_cast<long long>(xe.size()),
             xe.size() >= 2 ? pearson(xe, xs) : std::nan(""), S >= 2 ? pearson(de, ds) : std::nan(""),
             static_cast<long long>(qmax), cs.max_abs});
    out.tables.push_back(std::move(pairs));
    out.tables.push_back(std::move(diag));
    out.tables.push_back(std::move(sum));
}

void run_otoc(const Plan &P, RunOutput &out) {
    const auto &p = P.cfg.lattice;
    const auto &o = P.otoc;
    CVec b = P.state.amplitudes;
    std::optional<FixedPoint> fp;
    if (o.fixed_point) {
        fp = find_fixed_point(b, p);
        b = fp->psi;
        char buf[200];
        std::snprintf(buf, sizeof buf, "initial state sits on the fixed point with mu=%.10g, residual %.3g, max growth %.6g",
                      fp->mu, fp->residual, fp->max_growth);
        out.notes.push_back(buf);
    }
    auto st = P.state.kind == "coherent_sector" ? coherent_state_in_sector(p.L, P.state.N, b) : coherent_state(p.L, b);
    double nbar = 0;
    for (auto x : b)
        nbar += std::norm(x);
    const double N = P.state.kind == "coherent_sector" ? P.state.N : nbar;
    auto C = otoc(p, st, {o.V, o.W}, P.times, o.tol);

    LyapunovOptions lo;
    lo.seed = P.cfg.seed;
    lo.fixed_point = fp;
    auto ly = lyapunov(b, p, o.lyapunov_T, lo);

    std::vector<double> c(P.times.size());
    ResultTable t{"otoc", {"t", "C_raw", "C_per_particle"}, {}};
    for (std::size_t k = 0; k < P.times.size(); ++k) {
        c[k] = C.value[k].real();
        t.add({P.times[k], c[k], c[k] / (N * N)});
    }
    out.tables.push_back(std::move(t));
    ResultTable f{"otoc_fit",
                  {"fit_t0", "fit_t1", "slope", "two_lambda", "lambda_benettin", "lambda_error", "t_E",
                   "t_saturation", "plateau", "stationarity"},
                  {}};
    if (ly.lambda > 0) {
        try {
            auto g = analyse_otoc(P.times, c, ly.lambda, N);
            f.add({g.fit_t0, g.fit_t1, g.slope, 2 * ly.lambda, ly.lambda, ly.error, g.t_ehrenfest, g.t_saturation,
                   g.plateau, g.stationarity});
        } catch (const NumericError &e) {
            out.notes.push_back(std::string("growth fit skipped: ") + e.what());
            f.add({std::nan(""), std::nan(""), std::nan(""), 2 * ly.lambda, ly.lambda, ly.error, std::log(N) / ly.lambda,
                   std::nan(""), std::nan(""), std::nan("")});
        }
    } else {
        out.notes.push_back("no positive Lyapunov exponent: growth fit skipped");
        f.add({std::nan(""), std::nan(""), std::nan(""), 2 * ly.lambda, ly.lambda, ly.error, std::nan(""),
               std::nan(""), std::nan(""), std::nan("")});
    }
    out.tables.push_back(std::move(f));
}

void run_spectra(const Plan &P, RunOutput &out) {
    const auto &s = P.spectra;
    char buf[200];
    std::snprintf(buf, sizeof buf,
                  "lattice symmetries broken by on-site disorder eps ~ uniform(-%g, %g) instead of block "
                  "diagonalization",
                  s.disorder, s.disorder);
    out.notes.push_back(buf);
    auto raw = disorder_spectra(P.cfg.lattice, s.N, s.disorder, static_cast<std::size_t>(s.realizations), P.cfg.seed);
    std::vector<UnfoldedSpectrum> ens;
    std::vector<double> all;
    double r_sum = 0;
    for (const auto &e : raw) {
        ens.push_back(unfold(e, s.unfold));
        auto sp = spacings(ens.back().x);
        all.insert(all.end(), sp.begin(), sp.end());
        r_sum += mean_gap_ratio(e, 0.5);
    }
    out.notes.push_back("unfolding: " + ens.front().recipe);
    FormFactorOptions fo;
    fo.smoothing = s.smoothing;
    auto K = form_factor(ens, s.tau, fo);
    ResultTable ff{"spectra_form_factor", {"tau", "K", "K_goe", "ramp_goe"}, {}};
    double dev = 0;
    for (std::size_t k = 0; k < s.tau.size(); ++k) {
        double g = goe_form_factor(s.tau[k]);
        ff.add({s.tau[k], K[k], g, diagonal_ramp(s.tau[k], SymmetryClass::orthogonal)});
        if (s.tau[k] >= 0.2 && s.tau[k] <= 2.0)
            dev = std::max(dev, std::abs(K[k] - g));
    }
    out.tables.push_back(std::move(ff));

    ResultTable hist{"spectra_spacings", {"s_lo", "s_hi", "density", "poisson", "wigner_surmise"}, {}};
    const double ds = 0.1;
    for (int b = 0; b < 40; ++b) {
        double lo = b * ds, hi = lo + ds;
        auto cnt = std::count_if(all.begin(), all.end(), [&](double x) { return x >= lo && x < hi; });
        hist.add({lo, hi, static_cast<double>(cnt) / (static_cast<double>(all.size()) * ds),
                  (poisson_spacing_cdf(hi) - poisson_spacing_cdf(lo)) / ds,
                  (wigner_surmise_cdf(hi) - wigner_surmise_cdf(lo)) / ds});
    }
    out.tables.push_back(std::move(hist));

    double slope = std::nan("");
    try {
        slope = fit_ramp(s.tau, K).slope;
    } catch (const ArgumentError &) {
        out.notes.push_back("tau grid has too few points in [0.05, 0.3] for the ramp fit");
    }
    ResultTable sum{"spectra_summary",
                    {"realizations", "disorder", "levels", "mean_gap_ratio", "ks_goe_p", "ks_poisson_p",
                     "ramp_slope", "max_dev_goe"},
                    {}};
    sum.add({static_cast<long long>(s.realizations), s.disorder, static_cast<long long>(raw.front().size()),
             r_sum / static_cast<double>(raw.size()), ks_test(all, wigner_surmise_cdf).p_value,
             ks_test(all, poisson_spacing_cdf).p_value, slope, dev});
    out.tables.push_back(std::move(sum));
}

void run_lyapunov(const Plan &P, RunOutput &out) {
    const auto &p = P.cfg.lattice;
    const auto &l = P.lyapunov;
    LyapunovOptions lo;
    lo.renorm_dt = l.renorm_dt;
    lo.blocks = l.blocks;
    lo.seed = P.cfg.seed;
    CVec psi = P.state.amplitudes;
    if (l.fixed_point) {
        lo.fixed_point = find_fixed_point(psi, p);
        psi = lo.fixed_point->psi;
    }
    auto r = lyapunov(psi, p, l.T, lo);
    ResultTable b{"lyapunov_blocks", {"block", "lambda"}, {}};
    for (std::size_t k = 0; k < r.block_means.size(); ++k)
        b.add({static_cast<long long>(k), r.block_means[k]});
    ResultTable s{"lyapunov_summary", {"lambda", "error", "drift", "converged"}, {}};
    s.add({r.lambda, r.error, r.drift, static_cast<long long>(r.converged)});
    if (!r.converged)
        out.notes.push_back("block averages drift by more than 20%");
    out.tables.push_back(std::move(b));
    out.tables.push_back(std::move(s));
}

std::string format_cell(const Cell &c) {
    if (auto d = std::get_if<double>(&c)) {
        if (std::isnan(*d))
            return "nan";
        char buf[40];
        std::snprintf(buf, sizeof buf, "%.17g", *d);
        return buf;
    }
    if (auto i = std::get_if<long long>(&c))
        return std::to_string(*i);
    return std::get<std::string>(c);
}

} // namespace

ExperimentConfig parse_config(const std::string &json_text) { return parse_plan(json_text).cfg; }

std::vector<ConfigIssue> validate_config(const std::string &json_text) {
    Reader r;
    try {
        read_plan(json_text, r);
    } catch (const std::exception &e) {
        r.fail("", e.what());
    }
    return r.issues;
}

RunOutput run_experiment(const std::string &json_text, std::optional<std::uint64_t> seed) {
    auto t0 = std::chrono::steady_clock::now();
    Plan P = parse_plan(json_text);
    if (seed)
        P.cfg.seed = *seed;
    RunOutput out;
    out.experiment = P.cfg.experiment;
    out.config_hash = fnv1a64(P.cfg.canonical);
    out.seeds = {P.cfg.seed};
    const auto &id = P.cfg.experiment;
    if (id == "autocorr")
        run_autocorr(P, out);
    else if (id == "cbs")
        run_cbs(P, out);
    else if (id == "rwm")
        run_rwm(P, out);
    else if (id == "otoc")
        run_otoc(P, out);
    else if (id == "spectra")
        run_spectra(P, out);
    else
        run_lyapunov(P, out);
    out.wall_time_s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    return out;
}

std::string format_csv(const ResultTable &t) {
    std::ostringstream os;
    for (std::size_t i = 0; i < t.columns.size(); ++i)
        os << (i ? "," : "") << t.columns[i];
    os << "\n";
    for (const auto &row : t.rows) {
        for (std::size_t i = 0; i < row.size(); ++i)
            os << (i ? "," : "") << format_cell(row[i]);
        os << "\n";
    }
    return os.str();
}

std::string metadata_json(const RunOutput &r) {
    json m;
    char hash[20];
    std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(r.config_hash));
    m["config_hash"] = hash;
    m["experiment"] = r.experiment;
    m["seeds"] = r.seeds;
    m["versions"] = {{"fockchaos", library_version()},
                     {"schema", config_schema_version},
                     {"eigen", std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
                                   std::to_string(EIGEN_MINOR_VERSION)}};
    m["wall_time_s"] = r.wall_time_s;
    json tabs = json::array();
    for (const auto &t : r.tables)
        tabs.push_back({{"name", t.name}, {"columns", t.columns}, {"rows", t.rows.size()}});
    m["tables"] = tabs;
    m["notes"] = r.notes;
    return m.dump(2) + "\n";
}

std::vector<std::string> write_outputs(const RunOutput &r, const std::string &dir) {
    namespace fs = std::filesystem;
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec)
        throw ArgumentError("cannot create output directory " + dir + ": " + ec.message());
    std::vector<std::string> paths;
    auto put = [&](const fs::path &p, const std::string &body) {
        std::ofstream f(p, std::ios::binary);
        if (!f)
            throw ArgumentError("cannot write " + p.string());
        f << body;
        paths.push_back(p.string());
    };
    for (const auto &t : r.tables)
        put(fs::path(dir) / (t.name + ".csv"), format_csv(t));
    put(fs::path(dir) / (r.experiment + ".meta.json"), metadata_json(r));
    return paths;
}

} // namespace fockchaos
