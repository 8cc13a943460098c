#include "fockchaos.h"

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <optional>
#include <memory>
#include <new>
#include <string>

#include "fockchaos/experiments.hpp"
#include "fockchaos/fock.hpp"
#include "fockchaos/parallel.hpp"
#include "fockchaos/quantum.hpp"
#include "fockchaos/spectral.hpp"

struct fc_basis {
    fockchaos::FockBasis b;
};

struct fc_operator {
    fockchaos::SparseOperator op;
};

namespace {

thread_local std::string last_error;

fc_status code_of(fockchaos::Status s) {
    switch (s) {
    case fockchaos::Status::ok: return FC_OK;
    case fockchaos::Status::invalid_argument: return FC_INVALID_ARGUMENT;
    case fockchaos::Status::config: return FC_CONFIG;
    case fockchaos::Status::capacity: return FC_CAPACITY;
    case fockchaos::Status::numeric: return FC_NUMERIC;
    case fockchaos::Status::dimension: return FC_DIMENSION;
    default: return FC_INTERNAL;
    }
}

template <class F> fc_status guard(F &&f) {
    try {
        f();
        last_error.clear();
        return FC_OK;
    } catch (const fockchaos::Error &e) {
        last_error = e.what();
        return code_of(e.status());
    } catch (const std::bad_alloc &) {
        last_error = "out of memory";
        return FC_CAPACITY;
    } catch (const std::exception &e) {
        last_error = e.what();
        return FC_INTERNAL;
    } catch (...) {
        last_error = "unknown failure";
        return FC_INTERNAL;
    }
}

void need(const void *p, const char *what) {
    if (!p)
        throw fockchaos::ArgumentError(std::string(what) + " must not be NULL");
}

char *dup_string(const std::string &s) {
    char *c = static_cast<char *>(std::malloc(s.size() + 1));
    if (!c)
        throw std::bad_alloc();
    std::memcpy(c, s.c_str(), s.size() + 1);
    return c;
}

fockchaos::CVec unpack(const double *v, std::size_t n) {
    fockchaos::CVec out(n);
    for (std::size_t i = 0; i < n; ++i)
        out[i] = {v[2 * i], v[2 * i + 1]};
    return out;
}

void pack(const fockchaos::CVec &v, double *out) {
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[2 * i] = v[i].real();
        out[2 * i + 1] = v[i].imag();
    }
}

} // namespace

extern "C" {

const char *fc_last_error(void) { return last_error.c_str(); }
const char *fc_version(void) { return fockchaos::library_version(); }

fc_status fc_set_threads(int n) {
    return guard([&] {
        if (n < 0)
            throw fockchaos::ArgumentError("thread count must be non-negative");
        fockchaos::set_thread_count(n);
    });
}

fc_status fc_basis_create(int L, int N, size_t cap, fc_basis **out) {
    return guard([&] {
        need(out, "out");
        *out = nullptr;
        auto b = std::make_unique<fc_basis>(fc_basis{fockchaos::FockBasis(L, N, cap ? cap : fockchaos::default_basis_cap)});
        *out = b.release();
    });
}

void fc_basis_free(fc_basis *b) { delete b; }

fc_status fc_basis_size(const fc_basis *b, size_t *out) {
    return guard([&] {
        need(b, "basis");
        need(out, "out");
        *out = b->b.size();
    });
}

fc_status fc_basis_state(const fc_basis *b, size_t k, int *occupations) {
    return guard([&] {
        need(b, "basis");
        need(occupations, "occupations");
        if (k >= b->b.size())
            throw fockchaos::ArgumentError("state index out of range");
        auto s = b->b.occupations(k);
        std::copy(s.begin(), s.end(), occupations);
    });
}

fc_status fc_basis_index(const fc_basis *b, const int *occupations, size_t *out) {
    return guard([&] {
        need(b, "basis");
        need(occupations, "occupations");
        need(out, "out");
        std::vector<int> n(occupations, occupations + b->b.sites());
        *out = b->b.index(n);
    });
}

fc_status fc_hamiltonian_create(const fc_basis *b, const fc_lattice *p, fc_operator **out) {
    return guard([&] {
        need(b, "basis");
        need(p, "lattice");
        need(out, "out");
        *out = nullptr;
        fockchaos::LatticeParams q;
        q.L = p->L;
        q.J = p->J;
        q.U = p->U;
        q.phi = p->phi;
        if (p->eps)
            q.eps.assign(p->eps, p->eps + std::max(p->L, 0));
        if (p->geometry != FC_RING && p->geometry != FC_OPEN_CHAIN)
            throw fockchaos::ArgumentError("unknown geometry");
        q.geometry = p->geometry == FC_RING ? fockchaos::Geometry::ring : fockchaos::Geometry::open_chain;
        auto op = std::make_unique<fc_operator>(fc_operator{fockchaos::assemble_hamiltonian(b->b, q)});
        *out = op.release();
    });
}

fc_status fc_occupation_create(const fc_basis *b, int site, fc_operator **out) {
    return guard([&] {
        need(b, "basis");
        need(out, "out");
        *out = nullptr;
        auto op = std::make_unique<fc_operator>(fc_operator{fockchaos::occupation_operator(b->b, site)});
        *out = op.release();
    });
}

void fc_operator_free(fc_operator *op) { delete op; }

fc_status fc_operator_dim(const fc_operator *op, size_t *out) {
    return guard([&] {
        need(op, "operator");
        need(out, "out");
        *out = op->op.dim;
    });
}

fc_status fc_operator_apply(const fc_operator *op, const double *in, double *out) {
    return guard([&] {
        need(op, "operator");
        need(in, "in");
        need(out, "out");
        auto v = fockchaos::apply_operator(op->op, unpack(in, op->op.dim));
        pack(v, out);
    });
}

fc_status fc_propagate(const fc_operator *H, double *psi, double t, double tol) {
    return guard([&] {
        need(H, "operator");
        need(psi, "psi");
        auto v = unpack(psi, H->op.dim);
        fockchaos::propagate_inplace(H->op, v, t, tol);
        pack(v, psi);
    });
}

fc_status fc_eigenvalues(const fc_operator *H, double *out) {
    return guard([&] {
        need(H, "operator");
        need(out, "out");
        auto s = fockchaos::diagonalize(H->op, false);
        std::copy(s.values.begin(), s.values.end(), out);
    });
}

fc_status fc_goe_form_factor(double tau, double *out) {
    return guard([&] {
        need(out, "out");
        *out = fockchaos::goe_form_factor(tau);
    });
}

fc_status fc_experiment_validate(const char *config_json, char **report_json) {
    return guard([&] {
        need(config_json, "config");
        need(report_json, "report");
        *report_json = nullptr;
        auto issues = fockchaos::validate_config(config_json);
        nlohmann::json r;
        r["ok"] = issues.empty();
        r["issues"] = nlohmann::json::array();
        for (const auto &i : issues)
            r["issues"].push_back({{"path", i.path}, {"message", i.message}, {"capacity", i.capacity}});
        *report_json = dup_string(r.dump(2));
    });
}

fc_status fc_experiment_run(const char *config_json, const char *out_dir, long long seed, char **summary_json) {
    return guard([&] {
        need(config_json, "config");
        need(summary_json, "summary");
        *summary_json = nullptr;
        std::optional<std::uint64_t> s;
        if (seed >= 0)
            s = static_cast<std::uint64_t>(seed);
        auto cfg = fockchaos::parse_config(config_json);
        auto res = fockchaos::run_experiment(config_json, s);
        auto files = fockchaos::write_outputs(res, out_dir ? std::string(out_dir) : cfg.output_dir);
        char hash[20];
        std::snprintf(hash, sizeof hash, "%016llx", static_cast<unsigned long long>(res.config_hash));
        nlohmann::json r{{"files", files}, {"config_hash", hash}, {"wall_time_s", res.wall_time_s},
                         {"notes", res.notes}};
        *summary_json = dup_string(r.dump(2));
    });
}

void fc_string_free(char *s) { std::free(s); }

} // extern "C"
