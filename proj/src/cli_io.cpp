#include "cdmfg/cli_io.hpp"

#include "cdmfg/errors.hpp"
#include "cdmfg/regularity_diagnostics.hpp"
#include "cdmfg/wasserstein.hpp"

#include <json.hpp>

#include <bit>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <map>
#include <set>
#include <sstream>

namespace cdmfg {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// ---------------------------------------------------------------------------
// Config reading with key tracking.

std::string show(double v) {
    std::ostringstream s;
    s << v;
    return s.str();
}
std::string show(int v) { return std::to_string(v); }
std::string show(bool v) { return v ? "true" : "false"; }
std::string show(const std::string& v) { return v; }
std::string show(const Point& p) { return "[" + show(p[0]) + ", " + show(p[1]) + "]"; }
std::string show(const std::vector<double>& v) {
    std::string s = "[";
    for (std::size_t k = 0; k < v.size(); ++k) s += (k ? ", " : "") + show(v[k]);
    return s + "]";
}

class Section {
public:
    Section(const json& node, std::string path, std::vector<std::string>& defaults)
        : node_(node), path_(std::move(path)), defaults_(defaults) {
        if (!node_.is_object()) throw ConfigError(label("") + ": expected an object");
    }

    bool has(const std::string& key) const { return node_.contains(key); }

    template <class T>
    T get(const std::string& key, const T& fallback) {
        seen_.insert(key);
        if (!node_.contains(key)) {
            defaults_.push_back(label(key) + " = " + show(fallback));
            return fallback;
        }
        return convert<T>(key);
    }

    template <class T>
    T require(const std::string& key) {
        seen_.insert(key);
        if (!node_.contains(key)) throw ConfigError(label(key) + ": missing required key");
        return convert<T>(key);
    }

    Section child(const std::string& key) {
        seen_.insert(key);
        static const json empty = json::object();
        return Section(node_.contains(key) ? node_.at(key) : empty, label(key), defaults_);
    }

    void finish() const {
        for (const auto& item : node_.items()) {
            if (!seen_.count(item.key())) throw ConfigError(label(item.key()) + ": unknown key");
        }
    }

private:
    std::string label(const std::string& key) const {
        if (key.empty()) return path_.empty() ? "config" : path_;
        return path_.empty() ? key : path_ + "." + key;
    }

    template <class T>
    T convert(const std::string& key) const {
        const json& v = node_.at(key);
        try {
            if constexpr (std::is_same_v<T, Point>) {
                if (!v.is_array() || v.empty() || v.size() > 2) throw ConfigError(label(key) + ": expected 1 or 2 numbers");
                Point p{0.0, 0.0};
                for (std::size_t k = 0; k < v.size(); ++k) p[k] = v.at(k).get<double>();
                if (v.size() == 1) p[1] = 0.5;
                return p;
            } else if constexpr (std::is_same_v<T, std::vector<double>>) {
                if (!v.is_array()) throw ConfigError(label(key) + ": expected an array of numbers");
                return v.get<std::vector<double>>();
            } else if constexpr (std::is_same_v<T, int>) {
                if (!v.is_number_integer()) throw ConfigError(label(key) + ": expected an integer");
                return v.get<int>();
            } else if constexpr (std::is_same_v<T, double>) {
                if (!v.is_number()) throw ConfigError(label(key) + ": expected a number");
                return v.get<double>();
            } else if constexpr (std::is_same_v<T, bool>) {
                if (!v.is_boolean()) throw ConfigError(label(key) + ": expected true or false");
                return v.get<bool>();
            } else {
                if (!v.is_string()) throw ConfigError(label(key) + ": expected a string");
                return v.get<std::string>();
            }
        } catch (const json::exception& e) {
            throw ConfigError(label(key) + ": " + e.what());
        }
    }

    const json& node_;
    std::string path_;
    std::vector<std::string>& defaults_;
    std::set<std::string> seen_;
};

Controls read_controls(Section s, const Controls& fallback) {
    Controls c;
    c.alpha = s.get("alpha", fallback.alpha);
    c.eta = s.get("eta", fallback.eta);
    s.finish();
    return c;
}

ModelSpec read_model(Section s) {
    ModelSpec m;
    m.dim = s.get("dim", 1);
    if (m.dim != 1 && m.dim != 2) throw ConfigError("model.dim must be 1 or 2");

    Section b = s.child("bounds");
    m.bounds = ControlBounds(b.get("lambda1", 1.0), b.get("lambda2", 2.0), b.get("drift_bound", 1.0));
    b.finish();

    Section h = s.child("hamiltonian");
    const std::string kind = h.get<std::string>("kind", "model_a");
    if (kind == "model_a") {
        ModelACoefficients c;
        c.alpha_max = h.get("alpha_max", m.bounds.drift_bound());
        c.l1_weight = h.get("l1_weight", 1.0);
        c.eta_center = h.get("eta_center", 1.0);
        c.l3_weight = h.get("l3_weight", 1.0);
        m.hamiltonians = HamiltonianSpec::model_a(m.dim, m.bounds, c);
    } else if (kind == "single_control") {
        const double nu = h.require<double>("nu");
        ModelSpec base = single_control_model(nu, m.dim);
        if (base.bounds.lambda1() != m.bounds.lambda1() || base.bounds.lambda2() != m.bounds.lambda2() ||
            base.bounds.drift_bound() != m.bounds.drift_bound()) {
            TabulatedControls c;
            c.drift_controls = {Point{0.0, 0.0}};
            c.diffusion_controls = {nu};
            c.l1 = [](double, const Point&, const Point&) { return 0.0; };
            c.l3 = [](double, const Point&, double) { return 0.0; };
            c.depends_on_tx = false;
            m.hamiltonians = HamiltonianSpec::tabulated(m.dim, m.bounds, std::move(c));
        } else {
            m.hamiltonians = base.hamiltonians;
        }
    } else {
        throw ConfigError("model.hamiltonian.kind: expected model_a or single_control, got " + kind);
    }
    h.finish();

    Section f = s.child("coupling_f");
    m.coupling_f.gain = f.get("gain", 0.0);
    m.coupling_f.width = f.get("width", 0.1);
    f.finish();

    Section g = s.child("terminal_g");
    const std::string gk = g.get<std::string>("kind", "constant");
    if (gk == "constant") m.terminal_g.kind = TerminalCost::Kind::constant;
    else if (gk == "cosine") m.terminal_g.kind = TerminalCost::Kind::cosine;
    else throw ConfigError("model.terminal_g.kind: expected constant or cosine, got " + gk);
    m.terminal_g.offset = g.get("offset", 0.0);
    m.terminal_g.amplitude = g.get("amplitude", 0.0);
    m.terminal_g.gain = g.get("gain", 0.0);
    g.finish();

    Section d = s.child("m0");
    const std::string dk = d.get<std::string>("kind", "gaussian");
    if (dk == "uniform") m.m0.kind = InitialDensity::Kind::uniform;
    else if (dk == "dirac") m.m0.kind = InitialDensity::Kind::dirac;
    else if (dk == "gaussian") m.m0.kind = InitialDensity::Kind::gaussian;
    else throw ConfigError("model.m0.kind: expected uniform, dirac or gaussian, got " + dk);
    m.m0.center = d.get("center", Point{0.5, 0.5});
    m.m0.width = d.get("width", 0.1);
    d.finish();

    m.discount_lambda = s.get("discount_lambda", 0.0);
    s.finish();
    return m;
}

// ---------------------------------------------------------------------------
// Field and table output.

void require_finite(double v, const std::string& where) {
    if (!std::isfinite(v)) throw NumericalError("non-finite value in " + where, -1, -1);
}

std::string format_number(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

std::string level_name(int n) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "level_%06d.csv", n);
    return buf;
}

std::ofstream open_out(const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    return out;
}

class Table {
public:
    explicit Table(std::vector<std::string> header) : header_(std::move(header)) {}

    void row(std::vector<std::string> cells) { rows_.push_back(std::move(cells)); }
    static std::string num(double v, const std::string& where) {
        require_finite(v, where);
        return format_number(v);
    }

    void write(const fs::path& path) const {
        auto out = open_out(path);
        for (std::size_t k = 0; k < header_.size(); ++k) out << (k ? "," : "") << header_[k];
        out << "\n";
        for (const auto& r : rows_) {
            for (std::size_t k = 0; k < r.size(); ++k) out << (k ? "," : "") << r[k];
            out << "\n";
        }
        if (!out) throw std::runtime_error("write failed for " + path.string());
    }

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

std::map<std::string, std::string> read_manifest(const fs::path& directory) {
    const fs::path path = directory / "manifest.txt";
    std::ifstream in(path);
    if (!in) throw ConfigError("missing field manifest " + path.string());
    std::map<std::string, std::string> kv;
    std::string line;
    while (std::getline(in, line)) {
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        kv[line.substr(0, eq)] = line.substr(eq + 1);
    }
    for (const char* key : {"dim", "box_length", "nx", "nt", "horizon", "kind", "checksum"}) {
        if (!kv.count(key)) throw ConfigError(path.string() + ": missing " + key);
    }
    return kv;
}

// ---------------------------------------------------------------------------
// Subcommands.

class Runner {
public:
    Runner(const RunConfig& cfg, const RunOptions& opt, std::ostream& log)
        : cfg_(cfg), opt_(opt), log_(log), out_(opt.out ? *opt.out : cfg.output.directory) {
        fs::create_directories(out_);
        file_log_.open(out_ / "run.log");
        if (!file_log_) throw std::runtime_error("cannot write " + (out_ / "run.log").string());
        for (const auto& d : cfg_.defaults_used) note("default " + d);
    }

    void note(const std::string& line) {
        file_log_ << line << "\n";
        if (!opt_.quiet) log_ << line << "\n";
    }

    const fs::path& out() const { return out_; }
    const RunConfig& cfg() const { return cfg_; }
    const RunOptions& options() const { return opt_; }

    void hypotheses() {
        const auto samples = hypothesis_sample_grid(cfg_.model, cfg_.grid, 5.0, 20.0, 500);
        note(validate_hypotheses(cfg_.model, samples).summary());
    }

    DensityPath initial_path() const {
        return DensityPath::constant(cfg_.grid, discretize_initial_density(cfg_.model.m0, cfg_.grid));
    }

    // HJB with couplings frozen at the constant-in-time m0 path.
    std::pair<TimeField, CouplingData> hjb_at_m0() {
        CouplingData c = evaluate_couplings(cfg_.model, cfg_.grid, initial_path());
        TimeField u = solve_hjb(cfg_.model, c.F, c.G, cfg_.grid, cfg_.hjb);
        if (!u.all_finite()) throw NumericalError("solve_hjb produced non-finite values", -1, -1);
        return {std::move(u), std::move(c)};
    }

    void write_u(const TimeField& u) {
        if (!cfg_.output.write_fields) return;
        write_field(u, out_ / "u", "value");
        note("wrote u checksum " + std::to_string(field_checksum(u)));
    }

    void write_m(const DensityPath& m) {
        if (!cfg_.output.write_fields) return;
        write_field(m, out_ / "m");
        note("wrote m checksum " + std::to_string(field_checksum(m.field())));
    }

    void residual_table(const TimeField& u, const TimeField& F) {
        const TimeField r = hjb_residual(u, cfg_.model, F, cfg_.hjb);
        Table t({"level", "time", "sup_abs_residual"});
        for (int n = 0; n < cfg_.grid.levels(); ++n) {
            double worst = 0.0;
            for (double v : r.level(n)) worst = std::max(worst, std::abs(v));
            t.row({std::to_string(n), Table::num(cfg_.grid.time(n), "residual"), Table::num(worst, "residual")});
        }
        t.write(out_ / "residual.csv");
        note("hjb residual sup " + format_number(r.max_abs()));
    }

private:
    const RunConfig& cfg_;
    const RunOptions& opt_;
    std::ostream& log_;
    fs::path out_;
    std::ofstream file_log_;
};

int solve_hjb_command(Runner& r) {
    r.hypotheses();
    auto [u, c] = r.hjb_at_m0();
    r.write_u(u);
    r.residual_table(u, c.F);
    return 0;
}

int solve_fp_command(Runner& r) {
    r.hypotheses();
    auto [u, c] = r.hjb_at_m0();
    const TransportOperator op = build_transport_operator(u, r.cfg().model);
    auto m0 = discretize_initial_density(r.cfg().model.m0, r.cfg().grid);
    if (r.options().inject_negative_density) {
        m0[0] -= 1e-3;
        m0[1] += 1e-3;
        r.note("test hook: injected a negative density value at node 0");
    }
    const DensityPath m = solve_fp(op, m0);
    r.note("fp mass drift " + format_number(m.max_mass_drift()) + ", min density " + format_number(m.min_value()));
    r.write_u(u);
    r.write_m(m);
    return 0;
}

int solve_mfg_command(Runner& r) {
    r.hypotheses();
    const FixedPointResult res = picard_solve(r.cfg().model, r.cfg().grid, r.cfg().fixed_point);
    const FixedPointReport& rep = res.report;
    Table t({"iteration", "gap", "hjb_residual_sup", "fp_mass_drift", "holder_ratio"});
    for (int k = 0; k < rep.iterations; ++k) {
        const double h = rep.holder_ratio[k];
        t.row({std::to_string(k + 1), Table::num(rep.gap_history[k], "gap"),
               Table::num(rep.hjb_residual_sup[k], "residual"), Table::num(rep.fp_mass_drift[k], "mass drift"),
               std::isnan(h) ? std::string("nan") : Table::num(h, "holder")});
    }
    t.write(r.out() / "report.csv");
    {
        auto s = open_out(r.out() / "summary.txt");
        s << "converged=" << (rep.converged ? "true" : "false") << "\n"
          << "iterations=" << rep.iterations << "\n"
          << "damping=" << format_number(rep.damping) << "\n"
          << "final_gap=" << format_number(rep.gap_history.back()) << "\n"
          << "final_hjb_residual=" << format_number(rep.final_hjb_residual) << "\n"
          << "final_duality_gap=" << format_number(rep.final_duality_gap) << "\n"
          << "final_phi_defect=" << format_number(rep.final_phi_defect) << "\n";
    }
    r.note(std::string("fixed point converged=") + (rep.converged ? "true" : "false") + " after " +
           std::to_string(rep.iterations) + " iterations, last gap " + format_number(rep.gap_history.back()));
    for (double d : rep.fp_mass_drift) {
        if (d > 1e-12) throw ContractError("solve-mfg: mass drift " + format_number(d) + " exceeds 1e-12");
    }
    r.write_u(res.u);
    r.write_m(res.m);
    return 0;
}

std::pair<TimeField, DensityPath> read_prior(const Runner& r) {
    if (!r.options().from) throw ConfigError("verify-sde needs --from <directory of a prior solve>");
    const fs::path dir = *r.options().from;
    if (!fs::is_directory(dir)) throw ConfigError("no such directory: " + dir.string());
    TimeField u = read_field(dir / "u");
    TimeField m = read_field(dir / "m");
    if (!u.grid().same_lattice(r.cfg().grid) || !m.grid().same_lattice(r.cfg().grid)) {
        throw ConfigError("fields in " + dir.string() + " were written on a different grid");
    }
    return {std::move(u), DensityPath(std::move(m))};
}

int verify_sde_command(Runner& r) {
    auto [u, m] = read_prior(r);
    const auto& cfg = r.cfg();
    McConfig mc = cfg.mc.mc;
    if (r.options().seed) mc.seed = *r.options().seed;
    const double value = interpolate(cfg.grid, u.level(0), mc.x0);
    const double bias = 0.05;
    Table t({"check", "estimate", "std_error", "reference", "tolerance", "pass"});
    bool ok = true;
    auto add = [&](const std::string& name, double est, double se, double ref, double tol, bool pass) {
        t.row({name, Table::num(est, name), Table::num(se, name), Table::num(ref, name), Table::num(tol, name),
               pass ? "true" : "false"});
        ok = ok && pass;
        r.note(name + ": estimate " + format_number(est) + " se " + format_number(se) + " reference " +
               format_number(ref) + (pass ? " ok" : " FAILED"));
    };
    const McEstimate opt = simulate_value(u, m, cfg.model, mc);
    add("value", opt.mean, opt.std_error, value, 3 * opt.std_error + bias,
        std::abs(opt.mean - value) <= 3 * opt.std_error + bias);
    const McEstimate sub = simulate_policy(u, m, cfg.model, mc, constant_policy(cfg.model, cfg.mc.suboptimal));
    add("suboptimal", sub.mean, sub.std_error, value, 3 * sub.std_error + bias,
        sub.mean >= value - 3 * sub.std_error - bias);
    // h snapped to a whole number of grid steps
    const int h_steps = std::max(1, static_cast<int>(std::lround(cfg.grid.nt * cfg.mc.dpp_fraction)));
    const double h = h_steps * cfg.grid.dt();
    r.note("dpp horizon h = " + format_number(h) + " (" + std::to_string(h_steps) + " grid steps)");
    const DppResult dpp = dpp_check(u, m, cfg.model, mc, h);
    add("dpp", dpp.estimate, dpp.std_error, dpp.value, 3 * dpp.std_error + bias,
        dpp.gap <= 3 * dpp.std_error + bias);
    McConfig mod = mc;
    mod.dt_mc = cfg.mc.modulus_dt;
    const ModulusResult mr = modulus_check(cfg.model, mod, cfg.mc.modulus_h, cfg.mc.modulus_controls);
    add("modulus_exponent", mr.exponent, 0.0, 0.5, 0.1, mr.exponent >= 0.4 && mr.exponent <= 0.6);
    t.write(r.out() / "mc.csv");
    Table mt({"h", "mean_sup", "std_error"});
    for (std::size_t k = 0; k < mr.h.size(); ++k) {
        mt.row({Table::num(mr.h[k], "h"), Table::num(mr.mean_sup[k], "modulus"), Table::num(mr.std_error[k], "modulus")});
    }
    mt.write(r.out() / "modulus.csv");
    if (!ok) throw ContractError("verify-sde: at least one Monte-Carlo check failed");
    return 0;
}

int diagnose_command(Runner& r) {
    const auto& cfg = r.cfg();
    r.hypotheses();
    auto [u, c] = r.hjb_at_m0();
    Table t({"diagnostic", "value", "bound", "pass"});
    const double lip = lipschitz_constant(u);
    const double semi = semiconcavity_constant(u);
    const int lattice = cfg.grid.nx % 16 == 0 ? 16 : cfg.grid.nx;
    const auto triples = sample_triples(cfg.grid, lattice, 1000, 4, 7);
    const double three = three_point_check(u, triples, 0.05);
    t.row({"lipschitz", Table::num(lip, "lipschitz"), "", ""});
    t.row({"semiconcavity", Table::num(semi, "semiconcavity"), "", ""});
    t.row({"three_point", Table::num(three, "three_point"), "", ""});
    const auto hyp = validate_hypotheses(cfg.model, hypothesis_sample_grid(cfg.model, cfg.grid, 5.0, 20.0, 1000));
    for (const auto& chk : hyp.checks) {
        t.row({"hypothesis:" + chk.label, Table::num(chk.worst, chk.label), Table::num(chk.bound, chk.label),
               chk.pass ? "true" : "false"});
    }
    const auto km = class_M_check(cfg.model, random_krylov_samples(cfg.model, 1000, 13));
    for (const auto& chk : km.checks) {
        t.row({"class_M:" + chk.label, Table::num(chk.worst, chk.label), Table::num(chk.bound, chk.label),
               chk.pass ? "true" : "false"});
    }
    t.write(r.out() / "diagnostics.csv");
    r.note("lipschitz " + format_number(lip) + ", semiconcavity " + format_number(semi) + ", three-point " +
           format_number(three));
    r.note("class M: " + km.summary());
    return 0;
}

int wasserstein_command(Runner& r) {
    const auto& cfg = r.cfg();
    DensityPath m;
    if (r.options().from) {
        const fs::path dir = *r.options().from;
        if (!fs::is_directory(dir)) throw ConfigError("no such directory: " + dir.string());
        m = DensityPath(read_field(dir / "m"));
    } else {
        auto [u, c] = r.hjb_at_m0();
        m = solve_fp(build_transport_operator(u, cfg.model), discretize_initial_density(cfg.model.m0, cfg.grid));
    }
    const GridSpec& g = m.grid();
    std::vector<int> levels{0};
    for (int k = 3; k >= 0; --k) {
        const int l = static_cast<int>(std::lround(g.nt / std::pow(2.0, k)));
        if (l > levels.back()) levels.push_back(l);
    }
    Table t({"level_a", "level_b", "time_a", "time_b", "d1"});
    for (std::size_t a = 0; a < levels.size(); ++a) {
        for (std::size_t b = a + 1; b < levels.size(); ++b) {
            const double d = d1(g, m.level(levels[a]), m.level(levels[b]));
            t.row({std::to_string(levels[a]), std::to_string(levels[b]), Table::num(g.time(levels[a]), "time"),
                   Table::num(g.time(levels[b]), "time"), Table::num(d, "d1")});
        }
    }
    t.write(r.out() / "wasserstein.csv");
    const HolderFit fit = holder_half_diagnostic(m);
    Table h({"tau", "d1"});
    for (std::size_t k = 0; k < fit.taus.size(); ++k) h.row({Table::num(fit.taus[k], "tau"), Table::num(fit.distances[k], "d1")});
    h.write(r.out() / "holder.csv");
    r.note(fit.degenerate ? std::string("hoelder fit: degenerate (path does not move)")
                          : "hoelder fit: exponent " + format_number(fit.exponent) + ", max ratio " +
                                format_number(fit.constant));
    return 0;
}

}  // namespace

// ---------------------------------------------------------------------------

RunConfig parse_config(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(std::string("config: parse error: ") + e.what());
    }
    RunConfig cfg;
    Section root(doc, "", cfg.defaults_used);
    cfg.model = read_model(root.child("model"));

    Section g = root.child("grid");
    cfg.grid.dim = cfg.model.dim;
    cfg.grid.box_length = g.get("box_length", 1.0);
    cfg.grid.nx = g.get("nx", 64);
    cfg.grid.horizon = g.get("horizon", 1.0);
    cfg.model.horizon = cfg.grid.horizon;

    Section h = root.child("hjb");
    cfg.hjb.theta_lf = h.get("theta_lf", -1.0);
    cfg.hjb.quadrature_order = h.get("quadrature_order", 16);
    h.finish();

    const double theta = lax_friedrichs_theta(cfg.model, cfg.hjb);
    if (g.has("nt")) {
        cfg.grid.nt = g.require<int>("nt");
    } else {
        cfg.grid.nt = 1;
        cfg.grid.validate();
        cfg.grid.nt = g.get("nt", minimal_stable_nt(cfg.grid, cfg.model.bounds.eta_max(), theta));
    }
    g.finish();
    cfg.grid.validate();
    cfg.model.validate();
    require_hjb_cfl(cfg.model, cfg.grid, cfg.hjb);

    Section f = root.child("fixed_point");
    cfg.fixed_point.theta = f.get("theta", 0.5);
    cfg.fixed_point.tol = f.get("tol", 1e-4);
    cfg.fixed_point.max_iter = f.get("max_iter", 50);
    cfg.fixed_point.gap_stride = f.get("gap_stride", 0);
    cfg.fixed_point.hjb = cfg.hjb;
    f.finish();
    if (!(cfg.fixed_point.theta > 0.0 && cfg.fixed_point.theta <= 1.0)) throw ConfigError("fixed_point.theta must lie in (0, 1]");
    if (!(cfg.fixed_point.tol > 0.0)) throw ConfigError("fixed_point.tol must be positive");
    if (cfg.fixed_point.max_iter < 1) throw ConfigError("fixed_point.max_iter must be at least 1");

    Section mc = root.child("mc");
    McConfig& c = cfg.mc.mc;
    c.num_paths = mc.get("num_paths", 10000);
    c.dt_mc = mc.get("dt_mc", 0.0);
    c.seed = static_cast<std::uint64_t>(mc.get("seed", 1));
    c.x0 = mc.get("x0", Point{0.5, 0.5});
    c.antithetic = mc.get("antithetic", false);
    cfg.mc.dpp_fraction = mc.get("dpp_fraction", 0.125);
    cfg.mc.suboptimal = read_controls(mc.child("suboptimal"), cfg.mc.suboptimal);
    Section mod = mc.child("modulus");
    cfg.mc.modulus_h = mod.get("h", cfg.mc.modulus_h);
    cfg.mc.modulus_dt = mod.get("dt", cfg.mc.modulus_dt);
    cfg.mc.modulus_controls.alpha = mod.get("alpha", cfg.mc.modulus_controls.alpha);
    cfg.mc.modulus_controls.eta = mod.get("eta", cfg.mc.modulus_controls.eta);
    mod.finish();
    mc.finish();
    c.validate(cfg.grid);
    if (!(cfg.mc.dpp_fraction > 0.0 && cfg.mc.dpp_fraction <= 1.0)) throw ConfigError("mc.dpp_fraction must lie in (0, 1]");
    if (cfg.mc.modulus_h.size() < 4) throw ConfigError("mc.modulus.h needs at least four entries");

    Section o = root.child("output");
    cfg.output.directory = o.get<std::string>("directory", "out");
    cfg.output.write_fields = o.get("write_fields", true);
    o.finish();
    root.finish();
    return cfg;
}

RunConfig load_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config file " + path.string());
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_config(buf.str());
}

std::uint64_t field_checksum(const TimeField& field) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double v : field.raw()) {
        const auto bits = std::bit_cast<std::uint64_t>(v);
        for (int b = 0; b < 8; ++b) {
            h ^= (bits >> (8 * b)) & 0xffU;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

void write_field(const TimeField& field, const fs::path& directory, const std::string& kind) {
    if (!field.all_finite()) throw NumericalError("write_field: non-finite value in " + directory.string(), -1, -1);
    const GridSpec& g = field.grid();
    fs::create_directories(directory);
    for (int n = 0; n < g.levels(); ++n) {
        auto out = open_out(directory / level_name(n));
        out << (g.dim == 1 ? "x,value\n" : "x,y,value\n");
        auto slice = field.level(n);
        for (int i = 0; i < g.nodes(); ++i) {
            const Point x = g.coords(i);
            out << format_number(x[0]) << ',';
            if (g.dim == 2) out << format_number(x[1]) << ',';
            out << format_number(slice[i]) << '\n';
        }
        if (!out) throw std::runtime_error("write failed for " + (directory / level_name(n)).string());
    }
    auto m = open_out(directory / "manifest.txt");
    m << "dim=" << g.dim << "\n"
      << "box_length=" << format_number(g.box_length) << "\n"
      << "nx=" << g.nx << "\n"
      << "nt=" << g.nt << "\n"
      << "horizon=" << format_number(g.horizon) << "\n"
      << "kind=" << kind << "\n"
      << "checksum=" << field_checksum(field) << "\n";
    if (!m) throw std::runtime_error("write failed for " + (directory / "manifest.txt").string());
}

void write_field(const DensityPath& density, const fs::path& directory) {
    write_field(density.field(), directory, "density");
}

std::string read_field_kind(const fs::path& directory) { return read_manifest(directory).at("kind"); }

TimeField read_field(const fs::path& directory) {
    const auto kv = read_manifest(directory);
    GridSpec g;
    try {
        g.dim = std::stoi(kv.at("dim"));
        g.box_length = std::stod(kv.at("box_length"));
        g.nx = std::stoi(kv.at("nx"));
        g.nt = std::stoi(kv.at("nt"));
        g.horizon = std::stod(kv.at("horizon"));
    } catch (const std::exception&) {
        throw ConfigError("malformed manifest in " + directory.string());
    }
    g.validate();
    TimeField f(g);
    for (int n = 0; n < g.levels(); ++n) {
        const fs::path path = directory / level_name(n);
        std::ifstream in(path);
        if (!in) throw ConfigError("missing level file " + path.string());
        std::string line;
        std::getline(in, line);
        auto slice = f.level(n);
        for (int i = 0; i < g.nodes(); ++i) {
            if (!std::getline(in, line)) throw ConfigError("truncated level file " + path.string());
            const auto comma = line.rfind(',');
            slice[i] = std::strtod(line.c_str() + comma + 1, nullptr);
        }
    }
    if (std::to_string(field_checksum(f)) != kv.at("checksum")) {
        throw ContractError("checksum mismatch in " + directory.string());
    }
    return f;
}

int run_subcommand(const std::string& name, const RunConfig& config, const RunOptions& options,
                   std::ostream& log) {
    try {
        RunConfig cfg = config;
        if (options.seed) cfg.mc.mc.seed = *options.seed;
        Runner r(cfg, options, log);
        r.note("subcommand " + name);
        if (name == "solve-hjb") return solve_hjb_command(r);
        if (name == "solve-fp") return solve_fp_command(r);
        if (name == "solve-mfg") return solve_mfg_command(r);
        if (name == "verify-sde") return verify_sde_command(r);
        if (name == "diagnose") return diagnose_command(r);
        if (name == "wasserstein") return wasserstein_command(r);
        throw ConfigError("unknown subcommand " + name);
    } catch (const ConfigError& e) {
        log << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ContractError& e) {
        log << "contract failure: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        log << "failure: " << e.what() << "\n";
        return 1;
    }
}

int run_from_file(const std::string& name, const fs::path& config_path, const RunOptions& options,
                  std::ostream& log) {
    RunConfig cfg;
    try {
        cfg = load_config(config_path);
    } catch (const ConfigError& e) {
        log << "configuration error: " << e.what() << "\n";
        return 2;
    }
    return run_subcommand(name, cfg, options, log);
}

}  // namespace cdmfg
