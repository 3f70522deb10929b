// Benchmark front end for the L2-norm adaptive optimal control solver.
//
//   afem-ocp run       solve a problem adaptively or uniformly, emit CSV/VTK
//   afem-ocp compare   align two or more history CSVs by DOF count
//   afem-ocp activeset run and trace the control active-set boundaries
//
// Exit codes: 0 success, 1 configuration error, 2 solver failure, 3 I/O error.

#include "afem/adapt.hpp"
#include "afem/vtk.hpp"

#include "CLI11.hpp"

#include <Eigen/Core>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>

namespace fs = std::filesystem;
using namespace afem;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitSolver = 2;
constexpr int kExitIo = 3;

struct RunConfig {
    std::string problem = "example1";
    std::string refine_mode = "adaptive";  // adaptive | uniform
    double theta = 0.3;
    int r = 1;
    long max_dofs = -1;
    int max_iters = -1;
    double tol = 1e-10;
    int quad_order = 5;
    int n0 = 8;
    double mu_warn = std::numeric_limits<double>::infinity();
    std::string method = "fixed-point";  // fixed-point | active-set
    std::string out_dir;
    std::vector<std::string> emit = {"csv"};

    bool emits(const std::string& what) const {
        return std::find(emit.begin(), emit.end(), what) != emit.end();
    }
};

void add_run_options(CLI::App* cmd, RunConfig& cfg) {
    cmd->add_option("--problem", cfg.problem, "Problem name: example1, example2, poisson")
        ->check(CLI::IsMember({"example1", "example2", "poisson"}));
    cmd->add_option("--refine", cfg.refine_mode, "Refinement mode")
        ->check(CLI::IsMember({"adaptive", "uniform"}));
    cmd->add_option("--theta", cfg.theta, "Doerfler bulk parameter in (0,1]")
        ->check(CLI::Range(1e-6, 1.0));
    cmd->add_option("--r", cfg.r, "Bisections per marked element")->check(CLI::PositiveNumber);
    cmd->add_option("--max-dofs", cfg.max_dofs, "Stop once interior DOFs reach this");
    cmd->add_option("--max-iters", cfg.max_iters, "Stop after this many iterations");
    cmd->add_option("--tol", cfg.tol, "Outer solver tolerance")->check(CLI::PositiveNumber);
    cmd->add_option("--quad-order", cfg.quad_order, "Interior quadrature order")
        ->check(CLI::Range(2, 20));
    cmd->add_option("--n0", cfg.n0, "Initial mesh subdivisions per side")
        ->check(CLI::PositiveNumber);
    cmd->add_option("--mu-warn", cfg.mu_warn, "Warn when the grading norm exceeds this");
    cmd->add_option("--method", cfg.method, "Optimizer")
        ->check(CLI::IsMember({"fixed-point", "active-set"}));
    cmd->add_option("--out", cfg.out_dir, "Output directory");
    cmd->add_option("--emit", cfg.emit, "Artifacts: csv, vtk, activeset")
        ->delimiter(',')
        ->check(CLI::IsMember({"csv", "vtk", "activeset"}));
    cmd->set_config("--config", "", "Key-value config file; flags override");
}

AdaptOptions adapt_options(const RunConfig& cfg) {
    AdaptOptions opts;
    opts.theta = cfg.refine_mode == "uniform" ? 1.0 : cfg.theta;
    opts.uniform = cfg.refine_mode == "uniform";
    opts.r = cfg.r;
    opts.max_dofs = cfg.max_dofs;
    opts.max_iters = cfg.max_iters;
    opts.initial_n = cfg.n0;
    opts.mu_warn = cfg.mu_warn;
    opts.estimator.interior_quad_order = cfg.quad_order;
    if (opts.max_dofs < 0 && opts.max_iters < 0) opts.max_dofs = 10000;
    return opts;
}

SolverOptions solver_options(const RunConfig& cfg) {
    SolverOptions opts;
    opts.tol = cfg.tol;
    opts.quad_order = cfg.quad_order;
    opts.method = cfg.method == "active-set" ? OcpMethod::ActiveSet : OcpMethod::FixedPoint;
    return opts;
}

void print_summary(const AdaptiveHistory& hist) {
    std::printf("%4s %9s %9s %12s %12s %12s %8s\n", "k", "elems", "dofs", "eta", "err(u+y+p)",
                "osc", "EOC");
    const auto dofs = history_dofs(hist);
    const bool have_err = !hist.records.empty() && hist.records.front().err_u.has_value();
    const auto quantity = history_column(hist, have_err ? "err" : "eta");
    for (std::size_t i = 0; i < hist.records.size(); ++i) {
        const auto& r = hist.records[i];
        double eoc = 0.0;
        if (i > 0 && quantity[i] > 0 && quantity[i - 1] > 0 && dofs[i] != dofs[i - 1])
            eoc = -std::log(quantity[i] / quantity[i - 1]) /
                  std::log(double(dofs[i]) / double(dofs[i - 1]));
        std::printf("%4d %9ld %9ld %12.5e %12s %12.5e %8.3f\n", r.k, r.n_elem, r.n_dof, r.eta,
                    r.combined_error() ? std::to_string(*r.combined_error()).c_str() : "-",
                    r.osc, eoc);
    }
    if (hist.records.size() >= 4) {
        const double slope = least_squares_slope(quantity, dofs, 4);
        std::printf("tail EOC (LS, last 4, %s vs DOF): %.3f\n", have_err ? "error" : "eta",
                    slope);
    }
    std::printf("lambda (1 - 2^(-3r/2)): %.6f\n", hist.lambda);
}

void emit_activeset_files(const fs::path& dir, const Mesh& mesh, const DiscreteSolution& sol,
                          const ProblemSpec& spec) {
    // Variational control: the active-set boundary is a level set of the
    // continuous P1 field -p_T/alpha, so the traced segments cross elements.
    Eigen::VectorXd q = -sol.p.values / spec.alpha;
    write_segments_vtk((dir / "activeset_variational_lower.vtk").string(),
                       trace_level_segments(mesh, q, spec.lower));
    write_segments_vtk((dir / "activeset_variational_upper.vtk").string(),
                       trace_level_segments(mesh, q, spec.upper));
    // Full-discretization overlay: nodal interpolant of the clamped values;
    // its level sets follow element edges and vertex loci.
    Eigen::VectorXd u_nodal(mesh.n_vertices());
    for (int v = 0; v < mesh.n_vertices(); ++v)
        u_nodal[v] = std::max(spec.lower, std::min(spec.upper, q[v]));
    write_segments_vtk((dir / "activeset_full_lower.vtk").string(),
                       trace_level_segments(mesh, u_nodal, spec.lower));
    write_segments_vtk((dir / "activeset_full_upper.vtk").string(),
                       trace_level_segments(mesh, u_nodal, spec.upper));
}

Eigen::VectorXd centroid_control_samples(const Mesh& mesh, const DiscreteSolution& sol) {
    Eigen::VectorXd u(mesh.n_elements());
    for (int e = 0; e < mesh.n_elements(); ++e)
        u[e] = sol.control_at(e, {1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0});
    return u;
}

int run_command(const RunConfig& cfg, bool force_activeset) {
    const ProblemSpec spec = problem_by_name(cfg.problem);
    const AdaptOptions opts = adapt_options(cfg);
    const SolverOptions solver = solver_options(cfg);

    fs::path dir;
    if (!cfg.out_dir.empty()) {
        dir = cfg.out_dir;
        std::error_code ec;
        fs::create_directories(dir, ec);
        if (ec) {
            std::cerr << "cannot create output directory " << dir << ": " << ec.message()
                      << "\n";
            return kExitIo;
        }
    }

    IterationObserver observer;
    if (!dir.empty() && cfg.emits("vtk")) {
        observer = [&](const IterationRecord& rec, const Mesh& mesh, const DiscreteSolution& sol,
                       const IndicatorSet& ind) {
            char name[64];
            std::snprintf(name, sizeof(name), "snapshot_%04d.vtk", rec.k);
            write_vtk((dir / name).string(), mesh,
                      {{"y", sol.y.values}, {"p", sol.p.values}},
                      {{"eta2", ind.eta2_all()},
                       {"eta2_y", ind.eta2_y},
                       {"eta2_p", ind.eta2_p},
                       {"osc2", (ind.osc2_y + ind.osc2_p).eval()},
                       {"control_sample_centroid", centroid_control_samples(mesh, sol)}});
        };
    }

    AfemResult result;
    try {
        result = afem_loop(spec, opts, solver, observer);
    } catch (const std::exception& err) {
        std::cerr << "solver error: " << err.what() << "\n";
        return kExitSolver;
    }

    print_summary(result.history);
    if (spec.name == "poisson" && result.history.records.size() >= 2) {
        const double slope = least_squares_slope(history_column(result.history, "err"),
                                                 history_dofs(result.history),
                                                 static_cast<int>(result.history.records.size()));
        const bool pass = slope > -1.15 && slope < -0.85;
        std::printf("poisson oracle: L2-error slope %.3f vs DOF -> %s\n", slope,
                    pass ? "PASS" : "FAIL");
    }

    try {
        if (!dir.empty() && cfg.emits("csv"))
            write_history_csv(result.history, (dir / "history.csv").string());
        if (!dir.empty() && (cfg.emits("activeset") || force_activeset))
            emit_activeset_files(dir, *result.final_mesh, result.final_solution, spec);
        if (!dir.empty() && cfg.emits("vtk"))
            write_vtk((dir / "final.vtk").string(), *result.final_mesh,
                      {{"y", result.final_solution.y.values},
                       {"p", result.final_solution.p.values}},
                      {{"control_sample_centroid",
                        centroid_control_samples(*result.final_mesh, result.final_solution)}});
    } catch (const std::exception& err) {
        std::cerr << "output error: " << err.what() << "\n";
        return kExitIo;
    }

    return result.history.failed ? kExitSolver : 0;
}

int compare_command(const std::vector<std::string>& paths, const std::string& out_path) {
    std::vector<AdaptiveHistory> histories;
    try {
        for (const auto& p : paths) histories.push_back(read_history_csv(p));
    } catch (const std::exception& err) {
        std::cerr << "cannot read history: " << err.what() << "\n";
        return kExitIo;
    }
    auto error_of = [](const IterationRecord& r) {
        return r.combined_error() ? *r.combined_error() : r.eta;
    };
    std::string table = "dofs_0,err_0";
    for (std::size_t h = 1; h < histories.size(); ++h) {
        table += ",dofs_" + std::to_string(h) + ",err_" + std::to_string(h) + ",efficiency_" +
                 std::to_string(h);
    }
    table += "\n";
    for (const auto& ref : histories[0].records) {
        char buf[64];
        std::snprintf(buf, sizeof(buf), "%ld,%.6e", ref.n_dof, error_of(ref));
        table += buf;
        for (std::size_t h = 1; h < histories.size(); ++h) {
            const IterationRecord* nearest = nullptr;
            for (const auto& cand : histories[h].records)
                if (!nearest || std::abs(std::log(double(cand.n_dof) / ref.n_dof)) <
                                    std::abs(std::log(double(nearest->n_dof) / ref.n_dof)))
                    nearest = &cand;
            if (!nearest) continue;
            std::snprintf(buf, sizeof(buf), ",%ld,%.6e,%.6f", nearest->n_dof, error_of(*nearest),
                          error_of(ref) / error_of(*nearest));
            table += buf;
        }
        table += "\n";
    }
    std::fputs(table.c_str(), stdout);
    if (!out_path.empty()) {
        std::FILE* f = std::fopen(out_path.c_str(), "w");
        if (!f) {
            std::cerr << "cannot open " << out_path << "\n";
            return kExitIo;
        }
        std::fputs(table.c_str(), f);
        std::fclose(f);
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    if (const char* threads = std::getenv("AFEM_OCP_THREADS")) {
        const int cap = std::atoi(threads);
        if (cap > 0) Eigen::setNbThreads(cap);
    }

    CLI::App app{"L2-norm adaptive FEM benchmark for control-constrained "
                 "elliptic optimal control"};
    app.require_subcommand(1);

    RunConfig run_cfg;
    CLI::App* run = app.add_subcommand("run", "Run a benchmark configuration");
    add_run_options(run, run_cfg);

    RunConfig as_cfg;
    CLI::App* activeset =
        app.add_subcommand("activeset", "Run and trace active-set boundaries");
    add_run_options(activeset, as_cfg);

    std::vector<std::string> compare_paths;
    std::string compare_out;
    CLI::App* compare = app.add_subcommand("compare", "Merge history CSVs aligned by DOF");
    compare->add_option("csvs", compare_paths, "History CSV files")
        ->required()
        ->expected(2, 16);
    compare->add_option("--out", compare_out, "Write the merged table here");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (run->parsed()) return run_command(run_cfg, false);
        if (activeset->parsed()) {
            if (as_cfg.out_dir.empty()) {
                std::cerr << "activeset requires --out\n";
                return kExitConfig;
            }
            return run_command(as_cfg, true);
        }
        if (compare->parsed()) return compare_command(compare_paths, compare_out);
    } catch (const std::invalid_argument& err) {
        std::cerr << "configuration error: " << err.what() << "\n";
        return kExitConfig;
    } catch (const std::exception& err) {
        std::cerr << "error: " << err.what() << "\n";
        return kExitSolver;
    }
    return kExitConfig;
}
