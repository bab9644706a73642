#include "sds/cli.hpp"

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sds/dsl.hpp"
#include "sds/sim.hpp"

namespace sds::cli {
namespace {

using nlohmann::ordered_json;

constexpr int exit_pass = 0;
constexpr int exit_fail = 1;
constexpr int exit_inconclusive = 2;
constexpr int exit_usage = 3;

// Input-shaped trouble: unknown names, wrong charts, malformed values.
struct UsageError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// ---- small formatting helpers --------------------------------------------

std::string join(const std::vector<std::string>& parts, const char* sep) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += sep;
        out += parts[i];
    }
    return out;
}

std::string format_double(double v) {
    std::ostringstream os;
    os.precision(17);
    os << v;
    return os.str();
}

// ---- quotient-style expression rendering ---------------------------------

// Reports print coefficients for people, so negative powers and rational
// denominators collect under one division: 1 * r^-1 renders as 1/r and
// (n-1)/2 * r^-1 as a single (n-1)/(2*r)-shaped quotient.

std::string pretty(const Expr& e);

std::string pretty_atom(const Atom& a) {
    switch (a.kind) {
        case Atom::Kind::Name: return a.name;
        case Atom::Kind::Func: {
            const char* f = a.fn == Fn::Sin   ? "sin"
                            : a.fn == Fn::Cos ? "cos"
                            : a.fn == Fn::Exp ? "exp"
                                              : "sqrt";
            return std::string(f) + "(" + pretty(*a.arg) + ")";
        }
        case Atom::Kind::UFunc:
            return a.name + std::string(static_cast<std::size_t>(a.ticks), '\'') + "(" +
                   pretty(*a.arg) + ")";
        case Atom::Kind::Base: return "(" + pretty(*a.arg) + ")";
    }
    return "?";
}

std::string pow_str(const std::string& base, int e) {
    return e == 1 ? base : base + "^" + std::to_string(e);
}

std::string pretty_term(const Term& t) {
    std::vector<std::string> num, den;
    for (const auto& [atom, e] : t.factors) {
        std::string a = pretty_atom(atom);
        if (e > 0)
            num.push_back(pow_str(a, e));
        else
            den.push_back(pow_str(a, -e));
    }
    if (t.coef.is_float()) {
        double av = std::fabs(t.coef.to_double());
        if (av != 1.0 || num.empty()) num.insert(num.begin(), format_double(av));
    } else {
        const Rational& r = t.coef.rat();
        std::int64_t n = std::llabs(r.num());
        if (n != 1 || num.empty()) num.insert(num.begin(), std::to_string(n));
        if (r.den() != 1) den.insert(den.begin(), std::to_string(r.den()));
    }
    std::string ns = num.empty() ? "1" : join(num, "*");
    if (den.empty()) return ns;
    std::string ds = join(den, "*");
    if (den.size() > 1) ds = "(" + ds + ")";
    return ns + "/" + ds;
}

std::string pretty(const Expr& e) {
    const auto& ts = e.terms();
    if (ts.empty()) return "0";
    std::string out;
    for (std::size_t i = 0; i < ts.size(); ++i) {
        bool neg = ts[i].coef.negative();
        if (i == 0) {
            if (neg) out += "-";
        } else {
            out += neg ? " - " : " + ";
        }
        out += pretty_term(ts[i]);
    }
    return out;
}

std::string field_str(const VectorField& v) {
    std::vector<std::string> parts;
    for (int j = 0; j < v.chart.dim(); ++j) {
        if (v.comps[j].is_zero_literal()) continue;
        std::string c = pretty(v.comps[j]);
        if (v.comps[j].terms().size() > 1) c = "(" + c + ")";
        parts.push_back(c + " * d/d" + v.chart.coords[j].name);
    }
    return parts.empty() ? "0" : join(parts, " + ");
}

// ---- report scaffolding ---------------------------------------------------

const char* status_str(ZeroStatus s) {
    switch (s) {
        case ZeroStatus::SymbolicZero: return "symbolic-zero";
        case ZeroStatus::NumericZero: return "numeric-zero";
        case ZeroStatus::NonZero: return "non-zero";
    }
    return "?";
}

ordered_json point_json(const std::map<std::string, double>& p) {
    ordered_json j = ordered_json::object();
    for (const auto& [k, v] : p) j[k] = v;
    return j;
}

// Accumulates claims and the worst outcome seen; `needs_symbolic` marks
// claims where a numeric zero keeps the run from counting as a pass.
struct Report {
    ordered_json j;
    bool failed = false;
    bool inconclusive = false;

    explicit Report(const std::string& command) {
        j["schema"] = "sds-report/1";
        j["command"] = command;
        j["inputs"] = ordered_json::object();
        j["verdicts"] = ordered_json::array();
    }

    void claim(const std::string& name, const ZeroVerdict& v, bool needs_symbolic,
               ordered_json extra = ordered_json::object()) {
        ordered_json row;
        row["claim"] = name;
        row["status"] = status_str(v.status);
        row["max_residual"] = v.max_residual;
        row["samples"] = v.samples;
        if (v.witness) {
            row["witness"] = point_json(*v.witness);
            row["witness_residual"] = v.witness_residual;
        }
        for (auto& [k, val] : extra.items()) row[k] = val;
        j["verdicts"].push_back(row);
        if (!v.ok())
            failed = true;
        else if (needs_symbolic && !v.symbolic())
            inconclusive = true;
    }

    void fail(const std::string& why) {
        failed = true;
        j["failures"].push_back(why);
    }

    void note(const std::string& text) { j["notes"].push_back(text); }

    int finish(std::ostream& out) {
        j["status"] = failed ? "fail" : inconclusive ? "inconclusive" : "pass";
        out << j.dump(2) << "\n";
        return failed ? exit_fail : inconclusive ? exit_inconclusive : exit_pass;
    }
};

// ---- documents ------------------------------------------------------------

std::string fnv1a_hex(const std::string& s) {
    std::uint64_t h = 1469598103934665603ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[32];
    std::snprintf(buf, sizeof buf, "fnv1a:%016llx", static_cast<unsigned long long>(h));
    return buf;
}

struct LoadedDoc {
    std::string path;
    std::string hash;
    SystemDoc doc;
};

LoadedDoc load_doc(const std::string& path, std::ostream& err) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open document " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    ParseResult pr = parse(text);
    if (!pr.ok()) {
        for (const auto& e : pr.errors) err << path << ":" << e.str() << "\n";
        throw UsageError("document " + path + " failed to parse");
    }
    return {path, fnv1a_hex(text), std::move(*pr.doc)};
}

template <class M>
const typename M::mapped_type& need(const M& m, const std::string& name, const char* kind,
                                    const std::string& path) {
    auto it = m.find(name);
    if (it == m.end())
        throw UsageError(std::string("no ") + kind + " named '" + name + "' in " + path);
    return it->second;
}

// Operator by name, or the diffusion generator of an sds by name.
DiffOp operator_like(const LoadedDoc& d, const std::string& name) {
    if (auto it = d.doc.operators.find(name); it != d.doc.operators.end()) return it->second.op;
    if (auto it = d.doc.systems.find(name); it != d.doc.systems.end())
        return generator(it->second.system);
    throw UsageError("no operator or sds named '" + name + "' in " + d.path);
}

void same_chart(const std::string& a_kind, const std::string& a_name, const std::string& a_chart,
                const std::string& b_kind, const std::string& b_name,
                const std::string& b_chart) {
    if (a_chart != b_chart)
        throw UsageError(a_kind + " " + a_name + " lives on chart " + a_chart + ", but " +
                         b_kind + " " + b_name + " lives on " + b_chart);
}

void record_inputs(Report& r, const LoadedDoc& d, std::uint64_t seed, ordered_json params) {
    r.j["inputs"]["document"] = d.path;
    r.j["inputs"]["document_hash"] = d.hash;
    r.j["inputs"]["seed"] = seed;
    r.j["inputs"]["params"] = std::move(params);
}

std::uint64_t pick_seed(const std::optional<std::uint64_t>& cli, std::uint64_t fallback) {
    if (cli) return *cli;
    if (const char* env = std::getenv("SDS_SEED")) {
        errno = 0;
        char* end = nullptr;
        unsigned long long v = std::strtoull(env, &end, 10);
        if (errno != 0 || end == env || *end != '\0')
            throw UsageError("SDS_SEED must be an unsigned integer");
        return v;
    }
    return fallback;
}

constexpr std::uint64_t k_zero_seed = 0x51ab5eedULL;   // zero-test default
constexpr std::uint64_t k_verify_seed = 0x16a77e5ULL;  // system-verification default
constexpr std::uint64_t k_sim_seed = 1ULL;

ZeroTestOptions zero_opts(int samples, double tol, std::uint64_t seed) {
    ZeroTestOptions o;
    o.samples = samples;
    o.tol = tol;
    o.seed = seed;
    return o;
}

// ---- serialization of derived systems -------------------------------------

// Wraps an Sds into a standalone document: the chart, one drift field, one
// field per noise slot, and the sds statement tying them together.
std::string sds_to_dsl(const std::string& name, const Sds& s) {
    SystemDoc doc;
    doc.charts[s.chart.name] = s.chart;
    doc.order.emplace_back(DeclKind::Chart, s.chart.name);
    std::string dn = name + "_drift";
    doc.fields[dn] = FieldDecl{s.chart.name, s.drift};
    doc.order.emplace_back(DeclKind::Field, dn);
    SdsDecl decl;
    decl.chart = s.chart.name;
    decl.drift = {dn};
    for (std::size_t i = 0; i < s.noise.size(); ++i) {
        std::string nn = name + "_noise" + std::to_string(i + 1);
        doc.fields[nn] = FieldDecl{s.chart.name, s.noise[i]};
        doc.order.emplace_back(DeclKind::Field, nn);
        decl.noise.push_back(nn);
    }
    decl.system = s;
    doc.systems[name] = std::move(decl);
    doc.order.emplace_back(DeclKind::SdsRecord, name);
    return serialize(doc);
}

// ---- simulation plumbing ---------------------------------------------------

std::vector<double> resolve_x0(const Chart& c, const std::vector<double>& given) {
    if (!given.empty()) {
        if (given.size() != static_cast<std::size_t>(c.dim()))
            throw UsageError("--x0 needs " + std::to_string(c.dim()) + " values for chart " +
                             c.name);
        return given;
    }
    SampleDomain dom = c.sample_domain();
    std::vector<double> x0;
    x0.reserve(dom.size());
    for (const auto& r : dom) x0.push_back(0.5 * (r.lo + r.hi));
    return x0;
}

std::map<std::string, double> as_point(const Chart& c, const std::vector<double>& x) {
    std::map<std::string, double> pt;
    for (int j = 0; j < c.dim(); ++j) pt[c.coords[j].name] = x[static_cast<std::size_t>(j)];
    return pt;
}

ordered_json x0_json(const std::vector<double>& x0) { return ordered_json(x0); }

bool csv_mode(const std::string& out_mode) { return out_mode == "csv"; }

// ---- check subcommands -----------------------------------------------------

struct EqArgs {
    std::string doc, x, y;
    int samples = 64;
    double tol = 1e-9;
    std::optional<std::uint64_t> seed;
};

int cmd_check_equivalence(std::ostream& out, std::ostream& err, const EqArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_zero_seed);
    DiffOp lhs = operator_like(d, a.x);
    DiffOp rhs = operator_like(d, a.y);
    ZeroVerdict v = diffusion_equivalent(lhs, rhs, zero_opts(a.samples, a.tol, seed));
    Report r("check equivalence");
    record_inputs(r, d, seed,
                  {{"x", a.x}, {"y", a.y}, {"samples", a.samples}, {"tol", a.tol}});
    r.claim("generators agree", v, true);
    return r.finish(out);
}

struct IntegralArgs {
    std::string doc, x, f;
    std::string mode = "strong";
    int samples = 64;
    double tol = 1e-9;
    std::optional<std::uint64_t> seed;
};

int cmd_check_integral(std::ostream& out, std::ostream& err, const IntegralArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_zero_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const ScalarDecl& fd = need(d.doc.scalars, a.f, "scalar", d.path);
    same_chart("scalar", a.f, fd.chart, "sds", a.x, xd.chart);
    ZeroTestOptions opts = zero_opts(a.samples, a.tol, seed);
    Report r("check integral");
    record_inputs(r, d, seed,
                  {{"sds", a.x}, {"scalar", a.f}, {"mode", a.mode}, {"samples", a.samples}});
    if (a.mode == "strong") {
        ZeroVerdict v = strong_first_integral(xd.system, fd.value, IntegralMode::ByFields, opts);
        r.claim("every field annihilates " + a.f, v, true);
    } else {
        ZeroVerdict v = weak_first_integral(xd.system, fd.value, opts);
        r.claim("the generator annihilates " + a.f, v, true);
    }
    return r.finish(out);
}

struct InvArgs {
    std::string doc, x, g;
    std::string mode = "strict";
    int samples = 64;
    double tol = 1e-9;
    std::optional<std::uint64_t> seed;
};

int cmd_check_invariance(std::ostream& out, std::ostream& err, const InvArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_zero_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const ActionDecl& gd = need(d.doc.actions, a.g, "action", d.path);
    same_chart("action", a.g, gd.chart, "sds", a.x, xd.chart);
    ZeroTestOptions opts = zero_opts(a.samples, a.tol, seed);
    Report r("check invariance");
    record_inputs(r, d, seed,
                  {{"sds", a.x}, {"action", a.g}, {"mode", a.mode}, {"samples", a.samples}});
    const Sds& x = xd.system;
    if (a.mode == "strict") {
        InvarianceReport rep = strict_invariance(x, gd.action, opts);
        for (std::size_t i = 0; i < rep.verdicts.size(); ++i) {
            for (std::size_t k = 0; k < rep.verdicts[i].size(); ++k) {
                std::string fl = k == 0 ? "drift" : "noise" + std::to_string(k);
                ordered_json extra = ordered_json::object();
                if (!rep.verdicts[i][k].ok()) {
                    const VectorField& fld = k == 0 ? x.drift : x.noise[k - 1];
                    extra["bracket"] = field_str(lie_bracket(gd.action.generators[i], fld));
                }
                r.claim("[" + gd.generators[i] + ", " + fl + "]", rep.verdicts[i][k], true,
                        extra);
            }
        }
    } else {
        DiffusionInvarianceReport rep = diffusion_invariance(x, gd.action, opts);
        for (std::size_t i = 0; i < rep.verdicts.size(); ++i)
            r.claim("[generator, " + gd.generators[i] + "]", rep.verdicts[i], true);
    }
    return r.finish(out);
}

// ---- reduce ----------------------------------------------------------------

struct ReduceArgs {
    std::string doc, x, map;
    int samples = 16;
    double tol = 1e-9;
    std::optional<std::uint64_t> seed;
};

ordered_json fiber_pair_json(const FiberPair& fp) {
    ordered_json j;
    j["x"] = point_json(fp.x);
    j["y"] = point_json(fp.y);
    j["separation"] = fp.separation;
    j["quantity"] = fp.quantity;
    return j;
}

int cmd_reduce(std::ostream& out, std::ostream& err, const ReduceArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_zero_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const MapDecl& md = need(d.doc.maps, a.map, "map", d.path);
    if (!md.map.source.same_as(xd.system.chart))
        throw UsageError("map " + a.map + " does not start from the chart of " + a.x);

    Report r("reduce");
    record_inputs(r, d, seed, {{"sds", a.x}, {"map", a.map}, {"samples", a.samples}});

    SubmersionReport sub = submersion_check(md.map, 16, seed);
    ordered_json sj;
    sj["min_rank"] = sub.min_rank;
    sj["samples"] = sub.samples_used;
    sj["full_rank"] = sub.full_rank;
    if (!sub.full_rank) sj["witness"] = point_json(sub.witness);
    r.j["submersion"] = sj;
    if (!sub.full_rank) {
        r.fail("map is not a submersion");
        return r.finish(out);
    }

    ProjectionReport pr =
        project_generator(generator(xd.system), md.map, a.samples, zero_opts(64, a.tol, seed));
    if (!pr.ok) {
        r.fail("generator does not push down through the map");
        for (const auto& fp : pr.witnesses) r.j["witnesses"].push_back(fiber_pair_json(fp));
        return r.finish(out);
    }
    if (!pr.symbolic_form) {
        r.inconclusive = true;
        r.note("no section: fiber constancy checked numerically, nothing to serialize");
        return r.finish(out);
    }
    r.claim("section rewrite agrees on the source chart", pr.rewrite, true);

    const Chart& tc = md.map.target;
    int dim = tc.dim();
    ordered_json drift = ordered_json::object(), second = ordered_json::object();
    for (int j = 0; j < dim; ++j) {
        std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
        alpha[static_cast<std::size_t>(j)] = 1;
        Expr c = pr.reduced.coefficient(alpha);
        if (!c.is_zero_literal()) drift[tc.coords[j].name] = pretty(c);
    }
    for (int j = 0; j < dim; ++j) {
        for (int k = j; k < dim; ++k) {
            std::vector<int> alpha(static_cast<std::size_t>(dim), 0);
            alpha[static_cast<std::size_t>(j)] += 1;
            alpha[static_cast<std::size_t>(k)] += 1;
            Expr c = pr.reduced.coefficient(alpha);
            if (!c.is_zero_literal())
                second[tc.coords[j].name + "," + tc.coords[k].name] = pretty(c);
        }
    }
    r.j["reduced"] = {{"drift", drift}, {"second_order", second}};

    try {
        Sds red = realize_sds(pr.reduced);
        r.j["realized"] = {{"dsl", sds_to_dsl(a.x + "_reduced", red)}};
    } catch (const std::exception& e) {
        r.inconclusive = true;
        r.note(std::string("realization stayed numeric: ") + e.what());
    }
    return r.finish(out);
}

// ---- integrability ---------------------------------------------------------

struct VerifyArgs {
    std::string doc, sys, sds;
    int samples = 32;
    std::optional<std::uint64_t> seed;
};

void emit_system_report(Report& r, const IntegrableSystem& sys, const IntegrabilityReport& rep) {
    for (const auto& pv : rep.commutators)
        r.claim("[" + sys.member_label(pv.i) + ", " + sys.member_label(pv.j) + "]", pv.verdict,
                true);
    ordered_json ij;
    ij["rank"] = rep.independence.rank;
    ij["expected"] = rep.expected_rank;
    ij["samples"] = rep.independence.samples_used;
    ij["singular_values"] = ordered_json(rep.independence.singular_values);
    r.j["independence"] = ij;
    if (!rep.independent()) r.fail("symbols are functionally dependent");
    ordered_json pts = ordered_json::array();
    for (const auto& pc : rep.classifications) {
        ordered_json p;
        p["point"] = point_json(pc.point);
        p["class"] = str(pc.cls);
        pts.push_back(p);
    }
    r.j["points"] = pts;
}

int cmd_integrability_verify(std::ostream& out, std::ostream& err, const VerifyArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_verify_seed);
    const IsysDecl& sd = need(d.doc.isystems, a.sys, "system", d.path);
    Report r("integrability verify");
    ordered_json params = {{"system", a.sys}, {"samples", a.samples}};
    if (!a.sds.empty()) params["sds"] = a.sds;
    record_inputs(r, d, seed, params);
    if (a.sds.empty()) {
        IntegrabilityReport rep = verify_system(sd.system, a.samples, seed);
        emit_system_report(r, sd.system, rep);
    } else {
        const SdsDecl& xd = need(d.doc.systems, a.sds, "sds", d.path);
        same_chart("sds", a.sds, xd.chart, "system", a.sys, sd.chart);
        SdsIntegrabilityReport rep =
            verify_sds_integrable(xd.system, sd.system, a.samples, seed);
        emit_system_report(r, sd.system, rep.system);
        for (std::size_t k = 0; k < rep.generator_commutators.size(); ++k)
            r.claim("[generator, " + sd.system.member_label(static_cast<int>(k)) + "]",
                    rep.generator_commutators[k], true);
    }
    return r.finish(out);
}

struct PromoteArgs {
    std::string doc, sys;
    int samples = 32;
    std::optional<std::uint64_t> seed;
};

int cmd_integrability_promote(std::ostream& out, std::ostream& err, const PromoteArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_verify_seed);
    const IsysDecl& sd = need(d.doc.isystems, a.sys, "system", d.path);
    IntegrableSystem promoted = promote_to_p00(sd.system);
    Report r("integrability promote");
    record_inputs(r, d, seed, {{"system", a.sys}, {"samples", a.samples}});
    ordered_json labels = ordered_json::array();
    for (int k = 0; k < promoted.size(); ++k) labels.push_back(promoted.member_label(k));
    r.j["promoted_members"] = labels;
    IntegrabilityReport rep = verify_system(promoted, a.samples, seed);
    emit_system_report(r, promoted, rep);
    return r.finish(out);
}

struct NormalFormArgs {
    std::string doc, x, chart;
    std::vector<std::string> section;
};

int cmd_normal_form(std::ostream& out, std::ostream& err, const NormalFormArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    if (!a.chart.empty() && xd.chart != a.chart)
        throw UsageError(a.x + " lives on chart " + xd.chart + ", not " + a.chart);
    std::map<std::string, double> section;
    for (const auto& entry : a.section) {
        auto eq = entry.find('=');
        if (eq == std::string::npos)
            throw UsageError("--section entries look like name=value, got '" + entry + "'");
        std::string name = entry.substr(0, eq);
        try {
            section[name] = std::stod(entry.substr(eq + 1));
        } catch (const std::exception&) {
            throw UsageError("bad section value in '" + entry + "'");
        }
    }
    Report r("integrability normal-form");
    ordered_json sect = ordered_json::object();
    for (const auto& [k, v] : section) sect[k] = v;
    record_inputs(r, d, 0, {{"sds", a.x}, {"section", sect}});
    try {
        Sds nf = normal_form(xd.system, section);
        r.j["normal_form"] = {{"dsl", sds_to_dsl(a.x + "_nf", nf)}};
    } catch (const std::invalid_argument& e) {
        // Angle-dependent generator coefficients are a verification failure;
        // everything else about the section is caller error.
        std::string msg = e.what();
        if (msg.find("depends on") == std::string::npos) throw UsageError(msg);
        r.fail(msg);
    }
    return r.finish(out);
}

// ---- sim -------------------------------------------------------------------

struct RunArgs {
    std::string doc, x;
    std::string out_mode = "json";
    double dt = 1e-3, horizon = 1.0;
    int paths = 1000;
    std::vector<double> x0;
    std::optional<std::uint64_t> seed;
};

int cmd_sim_run(std::ostream& out, std::ostream& err, const RunArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_sim_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const Sds& x = xd.system;
    std::vector<double> x0 = resolve_x0(x.chart, a.x0);
    RngConfig rng{seed};

    std::vector<std::pair<int, std::vector<double>>> endpoints;
    std::size_t truncated = 0;
    for (int p = 0; p < a.paths; ++p) {
        Trajectory t =
            integrate(x, x0, a.dt, a.horizon, rng, static_cast<std::uint64_t>(p));
        if (t.truncated)
            ++truncated;
        else
            endpoints.emplace_back(p, t.last());
    }

    int dim = x.chart.dim();
    std::vector<double> mean(static_cast<std::size_t>(dim), 0.0);
    std::vector<double> var(static_cast<std::size_t>(dim), 0.0);
    for (const auto& [p, st] : endpoints)
        for (int j = 0; j < dim; ++j) mean[static_cast<std::size_t>(j)] += st[static_cast<std::size_t>(j)];
    std::size_t kept = endpoints.size();
    if (kept > 0)
        for (auto& m : mean) m /= static_cast<double>(kept);
    if (kept > 1) {
        for (const auto& [p, st] : endpoints)
            for (int j = 0; j < dim; ++j) {
                double dlt = st[static_cast<std::size_t>(j)] - mean[static_cast<std::size_t>(j)];
                var[static_cast<std::size_t>(j)] += dlt * dlt;
            }
        for (auto& v : var) v /= static_cast<double>(kept - 1);
    }

    bool majority_lost = truncated * 2 > static_cast<std::size_t>(a.paths);
    if (csv_mode(a.out_mode)) {
        out << "# sds-csv/1 run seed=" << seed << "\n";
        std::vector<std::string> hdr = {"path"};
        for (int j = 0; j < dim; ++j) hdr.push_back(x.chart.coords[j].name);
        out << join(hdr, ",") << "\n";
        for (const auto& [p, st] : endpoints) {
            std::vector<std::string> row = {std::to_string(p)};
            for (double v : st) row.push_back(format_double(v));
            out << join(row, ",") << "\n";
        }
        return majority_lost ? exit_fail : exit_pass;
    }

    Report r("sim run");
    record_inputs(r, d, seed,
                  {{"sds", a.x},
                   {"dt", a.dt},
                   {"horizon", a.horizon},
                   {"paths", a.paths},
                   {"x0", x0_json(x0)}});
    r.j["truncated"] = truncated;
    r.j["kept"] = kept;
    ordered_json stats = ordered_json::object();
    for (int j = 0; j < dim; ++j) {
        ordered_json sj;
        sj["mean"] = mean[static_cast<std::size_t>(j)];
        sj["variance"] = var[static_cast<std::size_t>(j)];
        stats[x.chart.coords[j].name] = sj;
    }
    r.j["stats"] = stats;
    ordered_json eps = ordered_json::array();
    for (const auto& [p, st] : endpoints) {
        ordered_json row;
        row["path"] = p;
        row["state"] = ordered_json(st);
        eps.push_back(row);
    }
    r.j["endpoints"] = eps;
    if (majority_lost) r.fail("truncated majority");
    return r.finish(out);
}

struct GenArgs {
    std::string doc, x, f;
    std::string out_mode = "json";
    double t = 0.05;
    int paths = 20000;
    std::vector<double> x0;
    std::optional<std::uint64_t> seed;
};

int cmd_sim_generator(std::ostream& out, std::ostream& err, const GenArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_sim_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const ScalarDecl& fd = need(d.doc.scalars, a.f, "scalar", d.path);
    same_chart("scalar", a.f, fd.chart, "sds", a.x, xd.chart);
    const Sds& x = xd.system;
    std::vector<double> x0 = resolve_x0(x.chart, a.x0);
    GeneratorEstimate est = empirical_generator(x, fd.value, x0, a.t, a.paths, RngConfig{seed});
    double symbolic = generator(x).apply(fd.value).eval(as_point(x.chart, x0));
    double delta = std::fabs(est.estimate - symbolic);
    // Euler-window bias of the forward quotient is first order in t; the
    // margin keeps honest systems from tripping pure statistics.
    double margin = 3.0 * est.std_error + 5.0 * a.t;
    bool pass = delta <= margin;

    if (csv_mode(a.out_mode)) {
        out << "# sds-csv/1 generator seed=" << seed << "\n";
        out << "observable,t,estimate,std_error,symbolic,delta,margin,pass\n";
        out << a.f << "," << format_double(a.t) << "," << format_double(est.estimate) << ","
            << format_double(est.std_error) << "," << format_double(symbolic) << ","
            << format_double(delta) << "," << format_double(margin) << "," << (pass ? 1 : 0)
            << "\n";
        return pass ? exit_pass : exit_fail;
    }

    Report r("sim generator");
    record_inputs(r, d, seed,
                  {{"sds", a.x},
                   {"observable", a.f},
                   {"t", a.t},
                   {"paths", a.paths},
                   {"x0", x0_json(x0)}});
    r.j["estimate"] = est.estimate;
    r.j["std_error"] = est.std_error;
    r.j["symbolic"] = symbolic;
    r.j["delta"] = delta;
    r.j["margin"] = margin;
    r.j["step"] = est.step;
    r.j["truncated"] = est.truncated;
    if (!pass) r.fail("empirical generator strays beyond the bias margin");
    return r.finish(out);
}

struct DensityArgs {
    std::string doc, x, observable, oracle;
    std::string out_mode = "json";
    double lo = 0.05, hi = 3.0, dt = 2e-3, burn_in = 10.0, horizon = 510.0;
    int bins = 30, paths = 2000;
    std::optional<double> sup_tol;
    std::vector<double> x0;
    std::optional<std::uint64_t> seed;
};

int cmd_sim_density(std::ostream& out, std::ostream& err, const DensityArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_sim_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const Sds& x = xd.system;
    if (a.observable.empty() != a.oracle.empty())
        throw UsageError("--observable and --oracle come as a pair");

    StationaryDensityOptions opts;
    opts.lo = a.lo;
    opts.hi = a.hi;
    opts.bins = a.bins;
    opts.dt = a.dt;
    opts.burn_in = a.burn_in;
    opts.horizon = a.horizon;
    opts.paths = a.paths;

    std::vector<double> x0 = resolve_x0(x.chart, a.x0);
    Report r("sim density");
    ordered_json params = {{"sds", a.x},     {"lo", a.lo},         {"hi", a.hi},
                           {"bins", a.bins}, {"dt", a.dt},         {"burn_in", a.burn_in},
                           {"horizon", a.horizon}, {"paths", a.paths}, {"x0", x0_json(x0)}};
    if (!a.observable.empty()) {
        params["observable"] = a.observable;
        params["oracle"] = a.oracle;
    }
    record_inputs(r, d, seed, params);

    StationaryDensityReport rep;
    try {
        if (a.observable.empty()) {
            rep = stationary_density_1d(x, x0.at(0), opts, RngConfig{seed});
        } else {
            const ScalarDecl& od = need(d.doc.scalars, a.observable, "scalar", d.path);
            same_chart("scalar", a.observable, od.chart, "sds", a.x, xd.chart);
            const SdsDecl& orc = need(d.doc.systems, a.oracle, "sds", d.path);
            rep = stationary_density_1d(x, od.value, x0, orc.system, opts, RngConfig{seed});
        }
    } catch (const std::exception& e) {
        r.fail(e.what());
        return r.finish(out);
    }

    bool pass = !a.sup_tol || rep.sup_distance <= *a.sup_tol;
    if (csv_mode(a.out_mode)) {
        out << "# sds-csv/1 density seed=" << seed
            << " sup_distance=" << format_double(rep.sup_distance) << "\n";
        out << "bin_lo,bin_hi,empirical,oracle\n";
        for (std::size_t b = 0; b + 1 < rep.edges.size(); ++b)
            out << format_double(rep.edges[b]) << "," << format_double(rep.edges[b + 1]) << ","
                << format_double(rep.empirical[b]) << "," << format_double(rep.oracle[b])
                << "\n";
        return pass ? exit_pass : exit_fail;
    }

    r.j["sup_distance"] = rep.sup_distance;
    r.j["mean"] = rep.mean;
    r.j["median"] = rep.median;
    r.j["mode"] = rep.mode;
    r.j["oracle_mass"] = rep.oracle_mass;
    r.j["samples"] = rep.samples;
    r.j["edges"] = ordered_json(rep.edges);
    r.j["empirical"] = ordered_json(rep.empirical);
    r.j["oracle"] = ordered_json(rep.oracle);
    if (a.sup_tol) r.j["sup_tol"] = *a.sup_tol;
    if (!pass) r.fail("sup distance exceeds the tolerance");
    return r.finish(out);
}

struct MartArgs {
    std::string doc, x;
    std::string out_mode = "json";
    std::vector<std::string> pair;
    double dt = 1e-3, horizon = 30.0;
    int paths = 300, windows = 10;
    std::vector<double> x0;
    std::optional<std::uint64_t> seed;
};

int cmd_sim_martingale(std::ostream& out, std::ostream& err, const MartArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_sim_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const Sds& x = xd.system;
    if (x.chart.dim() < 2) throw UsageError("martingale needs a chart with two coordinates");
    std::string cx = x.chart.coords[0].name, cy = x.chart.coords[1].name;
    if (!a.pair.empty()) {
        if (a.pair.size() != 2) throw UsageError("--pair takes two coordinate names");
        cx = a.pair[0];
        cy = a.pair[1];
    }
    int ix = x.chart.index_of(cx), iy = x.chart.index_of(cy);
    if (ix < 0 || iy < 0) throw UsageError("--pair names a coordinate missing from the chart");
    std::vector<double> x0 = resolve_x0(x.chart, a.x0);

    auto series = angle_series(x, x0, ix, iy, a.dt, a.horizon, a.paths, RngConfig{seed});
    MartingaleReport rep = martingale_test(series, a.dt, a.windows);

    if (csv_mode(a.out_mode)) {
        out << "# sds-csv/1 martingale seed=" << seed << "\n";
        out << "metric,value\n";
        for (std::size_t w = 0; w < rep.window_z.size(); ++w)
            out << "window" << (w + 1) << "_z," << format_double(rep.window_z[w]) << "\n";
        out << "mean_frequency," << format_double(rep.mean_frequency) << "\n";
        out << "frequency_std_error," << format_double(rep.frequency_std_error) << "\n";
        out << "max_step," << format_double(rep.max_step) << "\n";
        return rep.pass() ? exit_pass : exit_fail;
    }

    Report r("sim martingale");
    record_inputs(r, d, seed,
                  {{"sds", a.x},
                   {"pair", ordered_json::array({cx, cy})},
                   {"dt", a.dt},
                   {"horizon", a.horizon},
                   {"paths", a.paths},
                   {"windows", a.windows},
                   {"x0", x0_json(x0)}});
    r.j["window_z"] = ordered_json(rep.window_z);
    r.j["mean_frequency"] = rep.mean_frequency;
    r.j["frequency_std_error"] = rep.frequency_std_error;
    r.j["max_step"] = rep.max_step;
    if (!rep.pass()) r.fail("a window mean drifts beyond three standard errors");
    return r.finish(out);
}

struct KsArgs {
    std::string doc, x, observable, ref;
    std::string out_mode = "json";
    std::vector<double> times = {0.5, 1.0, 2.0};
    double dt = 1e-3;
    int paths = 2000;
    std::vector<double> x0, ref_x0;
    std::optional<std::uint64_t> seed;
};

int cmd_sim_ks(std::ostream& out, std::ostream& err, const KsArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_sim_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const ScalarDecl& od = need(d.doc.scalars, a.observable, "scalar", d.path);
    same_chart("scalar", a.observable, od.chart, "sds", a.x, xd.chart);
    const SdsDecl& rd = need(d.doc.systems, a.ref, "sds", d.path);
    const Sds& x = xd.system;
    const Sds& ref = rd.system;
    if (ref.chart.dim() != 1) throw UsageError("--ref must live on a one-dimensional chart");
    if (a.times.empty()) throw UsageError("--times needs at least one time");

    std::vector<double> x0 = resolve_x0(x.chart, a.x0);
    std::vector<double> rx0 = resolve_x0(ref.chart, a.ref_x0);
    Expr rid = Expr::symbol(ref.chart.coords[0].name);

    // Independent ensembles from one seed: the reference stream is the
    // golden-ratio offset of the master.
    auto xs = sampled_observable(x, x0, od.value, a.dt, a.times, a.paths, RngConfig{seed});
    auto rs = sampled_observable(ref, rx0, rid, a.dt, a.times, a.paths,
                                 RngConfig{seed ^ 0x9e3779b97f4a7c15ULL});

    bool all_pass = true;
    std::vector<KsReport> reports;
    for (std::size_t i = 0; i < a.times.size(); ++i) {
        KsReport k = ks_compare(xs[i].values, rs[i].values);
        all_pass = all_pass && k.pass();
        reports.push_back(k);
    }

    if (csv_mode(a.out_mode)) {
        out << "# sds-csv/1 ks seed=" << seed << "\n";
        out << "t,statistic,threshold,na,nb,pass\n";
        for (std::size_t i = 0; i < reports.size(); ++i)
            out << format_double(a.times[i]) << "," << format_double(reports[i].statistic)
                << "," << format_double(reports[i].threshold) << "," << reports[i].na << ","
                << reports[i].nb << "," << (reports[i].pass() ? 1 : 0) << "\n";
        return all_pass ? exit_pass : exit_fail;
    }

    Report r("sim ks");
    record_inputs(r, d, seed,
                  {{"sds", a.x},
                   {"observable", a.observable},
                   {"ref", a.ref},
                   {"times", ordered_json(a.times)},
                   {"dt", a.dt},
                   {"paths", a.paths},
                   {"x0", x0_json(x0)},
                   {"ref_x0", x0_json(rx0)}});
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < reports.size(); ++i) {
        ordered_json row;
        row["t"] = a.times[i];
        row["statistic"] = reports[i].statistic;
        row["threshold"] = reports[i].threshold;
        row["na"] = reports[i].na;
        row["nb"] = reports[i].nb;
        row["truncated_a"] = xs[i].truncated;
        row["truncated_b"] = rs[i].truncated;
        row["pass"] = reports[i].pass();
        rows.push_back(row);
    }
    r.j["comparisons"] = rows;
    if (!all_pass) r.fail("a comparison exceeds the one percent critical value");
    return r.finish(out);
}

struct TensorArgs {
    std::string doc, x, form;
    std::string out_mode = "json";
    double base_dt = 4e-3, horizon = 1.0, order_tol = 0.9;
    int levels = 4;
    std::vector<double> x0;
    std::optional<std::uint64_t> seed;
};

std::vector<std::vector<double>> parse_form(const std::string& text, int dim) {
    std::vector<std::vector<double>> m;
    if (text.empty()) {
        if (dim != 2) throw UsageError("--form is required away from two dimensions");
        return {{0.0, 1.0}, {-1.0, 0.0}};
    }
    std::stringstream rows(text);
    std::string row;
    while (std::getline(rows, row, ';')) {
        std::vector<double> r;
        std::stringstream cells(row);
        std::string cell;
        while (std::getline(cells, cell, ',')) {
            try {
                r.push_back(std::stod(cell));
            } catch (const std::exception&) {
                throw UsageError("bad form entry '" + cell + "'");
            }
        }
        m.push_back(std::move(r));
    }
    if (m.size() != static_cast<std::size_t>(dim))
        throw UsageError("--form needs " + std::to_string(dim) + " rows");
    for (const auto& r : m)
        if (r.size() != static_cast<std::size_t>(dim))
            throw UsageError("--form rows need " + std::to_string(dim) + " entries");
    return m;
}

std::vector<ProbePair> basis_probes(int dim) {
    std::vector<ProbePair> probes;
    for (int i = 0; i < dim && probes.size() < 6; ++i)
        for (int j = i + 1; j < dim && probes.size() < 6; ++j) {
            std::vector<double> a(static_cast<std::size_t>(dim), 0.0);
            std::vector<double> b(static_cast<std::size_t>(dim), 0.0);
            a[static_cast<std::size_t>(i)] = 1.0;
            b[static_cast<std::size_t>(j)] = 1.0;
            probes.emplace_back(std::move(a), std::move(b));
        }
    return probes;
}

int cmd_sim_tensor(std::ostream& out, std::ostream& err, const TensorArgs& a) {
    LoadedDoc d = load_doc(a.doc, err);
    std::uint64_t seed = pick_seed(a.seed, k_sim_seed);
    const SdsDecl& xd = need(d.doc.systems, a.x, "sds", d.path);
    const Sds& x = xd.system;
    std::vector<std::vector<double>> omega = parse_form(a.form, x.chart.dim());
    std::vector<double> x0 = resolve_x0(x.chart, a.x0);
    std::vector<ProbePair> probes = basis_probes(x.chart.dim());

    Report r("sim tensor");
    record_inputs(r, d, seed,
                  {{"sds", a.x},
                   {"base_dt", a.base_dt},
                   {"levels", a.levels},
                   {"horizon", a.horizon},
                   {"order_tol", a.order_tol},
                   {"x0", x0_json(x0)}});

    TensorOrderStudy st;
    try {
        st = tensor_order_study(x, omega, x0, a.base_dt, a.levels, a.horizon, RngConfig{seed},
                                0, probes);
    } catch (const std::invalid_argument& e) {
        // Precondition rejection: a field is not symbolically Hamiltonian
        // for the form (or the form itself is bad).
        r.fail(e.what());
        return r.finish(out);
    }

    bool pass = st.order >= a.order_tol;
    if (csv_mode(a.out_mode)) {
        out << "# sds-csv/1 tensor seed=" << seed << " order=" << format_double(st.order)
            << " pass=" << (pass ? 1 : 0) << "\n";
        out << "level,dt,deviation\n";
        for (std::size_t i = 0; i < st.dts.size(); ++i)
            out << i << "," << format_double(st.dts[i]) << ","
                << format_double(st.deviations[i]) << "\n";
        return pass ? exit_pass : exit_fail;
    }

    r.j["dts"] = ordered_json(st.dts);
    r.j["deviations"] = ordered_json(st.deviations);
    r.j["order"] = st.order;
    if (!pass) r.fail("deviation order falls short of the tolerance");
    return r.finish(out);
}

// ---- parse -----------------------------------------------------------------

int cmd_parse(std::ostream& out, std::ostream& err, const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw UsageError("cannot open document " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    ParseResult pr = parse(ss.str());
    if (!pr.ok()) {
        for (const auto& e : pr.errors) err << path << ":" << e.str() << "\n";
        return exit_usage;
    }
    const SystemDoc& doc = *pr.doc;
    out << "parsed " << path << ": " << doc.charts.size() << " charts, " << doc.scalars.size()
        << " scalars, " << doc.fields.size() << " fields, " << doc.operators.size()
        << " operators, " << doc.systems.size() << " sds, " << doc.actions.size()
        << " actions, " << doc.maps.size() << " maps, " << doc.isystems.size() << " systems\n";
    return exit_pass;
}

} // namespace

// ---- wiring ----------------------------------------------------------------

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
    CLI::App app{"symmetry workbench for Stratonovich diffusion systems", "sds"};
    app.require_subcommand(1);

    std::function<int()> action;

    auto add_zero_opts = [](CLI::App* c, int* samples, double* tol,
                            std::optional<std::uint64_t>* seed) {
        c->add_option("--samples", *samples, "sample points per zero test");
        c->add_option("--tol", *tol, "zero-test tolerance");
        c->add_option("--seed", *seed, "rng seed (SDS_SEED overrides the default)");
    };

    // check
    auto* check = app.add_subcommand("check", "symbolic claims about documents");
    check->require_subcommand(1);
    {
        auto a = std::make_shared<EqArgs>();
        auto* c = check->add_subcommand("equivalence",
                                        "compare two diffusion generators coefficient-wise");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "operator or sds name")->required();
        c->add_option("y", a->y, "operator or sds name")->required();
        add_zero_opts(c, &a->samples, &a->tol, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_check_equivalence(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<IntegralArgs>();
        auto* c = check->add_subcommand("integral", "first-integral test for a scalar");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("f", a->f, "scalar name")->required();
        c->add_option("--mode", a->mode, "strong or weak")
            ->check(CLI::IsMember({"strong", "weak"}));
        add_zero_opts(c, &a->samples, &a->tol, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_check_integral(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<InvArgs>();
        auto* c = check->add_subcommand("invariance", "group-action invariance of an sds");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("g", a->g, "action name")->required();
        c->add_option("--mode", a->mode, "strict or diffusion")
            ->check(CLI::IsMember({"strict", "diffusion"}));
        add_zero_opts(c, &a->samples, &a->tol, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_check_invariance(out, err, *a); };
        });
    }

    // reduce
    {
        auto a = std::make_shared<ReduceArgs>();
        auto* c = app.add_subcommand("reduce", "push an sds generator through a quotient map");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("--map", a->map, "map name")->required();
        c->add_option("--samples", a->samples, "fiber sample pairs");
        c->add_option("--tol", a->tol, "zero-test tolerance");
        c->add_option("--seed", a->seed, "rng seed (SDS_SEED overrides the default)");
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_reduce(out, err, *a); };
        });
    }

    // integrability
    auto* integ = app.add_subcommand("integrability", "commuting-family verification");
    integ->require_subcommand(1);
    {
        auto a = std::make_shared<VerifyArgs>();
        auto* c = integ->add_subcommand("verify", "verify a declared system");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("sys", a->sys, "system name")->required();
        c->add_option("--sds", a->sds, "also commute against this sds generator");
        c->add_option("--samples", a->samples, "rank sample points");
        c->add_option("--seed", a->seed, "rng seed (SDS_SEED overrides the default)");
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_integrability_verify(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<PromoteArgs>();
        auto* c = integ->add_subcommand("promote", "rewrite to operators only and re-verify");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("sys", a->sys, "system name")->required();
        c->add_option("--samples", a->samples, "rank sample points");
        c->add_option("--seed", a->seed, "rng seed (SDS_SEED overrides the default)");
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_integrability_promote(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<NormalFormArgs>();
        auto* c = integ->add_subcommand("normal-form", "freeze noise at an angle section");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("--chart", a->chart, "expected chart of the sds");
        c->add_option("--section", a->section, "angle assignments name=value")
            ->required()
            ->delimiter(',');
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_normal_form(out, err, *a); };
        });
    }

    // sim
    auto* sim = app.add_subcommand("sim", "Monte Carlo studies");
    sim->require_subcommand(1);
    auto add_sim_opts = [](CLI::App* c, std::string* out_mode, std::vector<double>* x0,
                           std::optional<std::uint64_t>* seed) {
        c->add_option("--out", *out_mode, "json or csv")->check(CLI::IsMember({"json", "csv"}));
        c->add_option("--x0", *x0, "start state, comma separated")->delimiter(',');
        c->add_option("--seed", *seed, "rng master seed (SDS_SEED overrides the default)");
    };
    {
        auto a = std::make_shared<RunArgs>();
        auto* c = sim->add_subcommand("run", "integrate an ensemble and report endpoints");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("--dt", a->dt, "step size");
        c->add_option("--horizon", a->horizon, "time horizon");
        c->add_option("--paths", a->paths, "ensemble size");
        add_sim_opts(c, &a->out_mode, &a->x0, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_sim_run(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<GenArgs>();
        auto* c = sim->add_subcommand("generator", "empirical generator bracket at a point");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("--observable", a->f, "scalar name")->required();
        c->add_option("--t", a->t, "bracket window");
        c->add_option("--paths", a->paths, "ensemble size");
        add_sim_opts(c, &a->out_mode, &a->x0, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_sim_generator(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<DensityArgs>();
        auto* c = sim->add_subcommand("density", "long-run occupation versus the closed form");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("--observable", a->observable, "scalar harvested along paths");
        c->add_option("--oracle", a->oracle, "one-dimensional sds for the closed form");
        c->add_option("--lo", a->lo, "range low edge");
        c->add_option("--hi", a->hi, "range high edge");
        c->add_option("--bins", a->bins, "histogram bins");
        c->add_option("--dt", a->dt, "step size");
        c->add_option("--burn-in", a->burn_in, "discarded prefix per path");
        c->add_option("--horizon", a->horizon, "per-path horizon, burn-in included");
        c->add_option("--paths", a->paths, "ensemble size");
        c->add_option("--sup-tol", a->sup_tol, "fail above this sup distance");
        add_sim_opts(c, &a->out_mode, &a->x0, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_sim_density(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<MartArgs>();
        auto* c = sim->add_subcommand("martingale", "unwrapped-angle window test");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("--pair", a->pair, "the two coordinates spanning the angle")
            ->delimiter(',');
        c->add_option("--dt", a->dt, "step size");
        c->add_option("--horizon", a->horizon, "time horizon");
        c->add_option("--paths", a->paths, "ensemble size");
        c->add_option("--windows", a->windows, "window count");
        add_sim_opts(c, &a->out_mode, &a->x0, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_sim_martingale(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<KsArgs>();
        auto* c = sim->add_subcommand("ks", "two-sample distribution comparison at fixed times");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("--observable", a->observable, "scalar sampled on x")->required();
        c->add_option("--ref", a->ref, "one-dimensional reference sds")->required();
        c->add_option("--times", a->times, "sample times")->delimiter(',');
        c->add_option("--dt", a->dt, "step size");
        c->add_option("--paths", a->paths, "ensemble size per side");
        c->add_option("--ref-x0", a->ref_x0, "reference start state")->delimiter(',');
        add_sim_opts(c, &a->out_mode, &a->x0, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_sim_ks(out, err, *a); };
        });
    }
    {
        auto a = std::make_shared<TensorArgs>();
        auto* c = sim->add_subcommand("tensor", "pathwise form preservation order study");
        c->add_option("doc", a->doc, "system document")->required();
        c->add_option("x", a->x, "sds name")->required();
        c->add_option("--form", a->form, "constant form, rows split by ';', entries by ','");
        c->add_option("--base-dt", a->base_dt, "coarsest step size");
        c->add_option("--levels", a->levels, "halving levels");
        c->add_option("--horizon", a->horizon, "time horizon");
        c->add_option("--order-tol", a->order_tol, "minimum acceptable deviation order");
        add_sim_opts(c, &a->out_mode, &a->x0, &a->seed);
        c->callback([&action, &out, &err, a] {
            action = [&out, &err, a] { return cmd_sim_tensor(out, err, *a); };
        });
    }

    // parse
    {
        auto path = std::make_shared<std::string>();
        auto* c = app.add_subcommand("parse", "parse a document and report diagnostics");
        c->add_option("file", *path, "document to parse")->required();
        c->callback([&action, &out, &err, path] {
            action = [&out, &err, path] { return cmd_parse(out, err, *path); };
        });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int rc = app.exit(e, out, err);
        return rc == 0 ? exit_pass : exit_usage;
    }

    if (!action) {
        err << app.help();
        return exit_usage;
    }
    try {
        return action();
    } catch (const UsageError& e) {
        err << "sds: " << e.what() << "\n";
        return exit_usage;
    } catch (const std::exception& e) {
        err << "sds: " << e.what() << "\n";
        return exit_usage;
    }
}

} // namespace sds::cli
