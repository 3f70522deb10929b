#include "afem/adapt.hpp"

#include <algorithm>
#include <chrono>
#include <functional>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace afem {

void AdaptOptions::validate() const {
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("AdaptOptions: theta in (0,1] required");
    if (r < 1) throw std::invalid_argument("AdaptOptions: r >= 1 required");
    if (initial_n < 1) throw std::invalid_argument("AdaptOptions: initial_n >= 1 required");
    if (max_dofs < 0 && max_iters < 0 && eta_stop <= 0.0)
        throw std::invalid_argument("AdaptOptions: no stop rule configured");
}

double contraction_lambda(int r, int d) {
    return 1.0 - std::pow(2.0, -3.0 * r / static_cast<double>(d));
}

MarkResult doerfler_mark(const Eigen::VectorXd& eta2, double theta) {
    if (eta2.size() == 0) throw std::invalid_argument("doerfler_mark: empty indicator set");
    if (!(theta > 0.0 && theta <= 1.0))
        throw std::invalid_argument("doerfler_mark: theta in (0,1] required");
    MarkResult out;
    const double total = eta2.sum();
    if (total <= 0.0) {
        out.estimator_zero = true;
        return out;
    }
    if (theta == 1.0) {
        for (int i = 0; i < eta2.size(); ++i)
            if (eta2[i] > 0.0) out.marked.push_back(i);
        return out;
    }
    std::vector<int> order(eta2.size());
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(), [&](int a, int b) {
        return eta2[a] != eta2[b] ? eta2[a] > eta2[b] : a < b;
    });
    const double target = theta * theta * total;
    double acc = 0.0;
    for (int id : order) {
        out.marked.push_back(id);
        acc += eta2[id];
        if (acc >= target) break;
    }
    std::sort(out.marked.begin(), out.marked.end());
    return out;
}

MarkResult doerfler_mark(const IndicatorSet& indicators, double theta) {
    return doerfler_mark(indicators.eta2_all(), theta);
}

AfemResult afem_loop(const ProblemSpec& spec, const AdaptOptions& opts,
                     const SolverOptions& solver_opts, const IterationObserver& observer) {
    opts.validate();
    spec.validate();

    AfemResult result;
    result.history.lambda = contraction_lambda(opts.r);
    auto mesh = std::make_shared<Mesh>(create_unit_square_mesh(opts.initial_n));
    Eigen::VectorXd warm_p;

    double prev_eta = -1.0;
    double prev_err_osc = -1.0;
    for (int k = 0;; ++k) {
        const auto t0 = std::chrono::steady_clock::now();
        const Eigen::VectorXd* warm = warm_p.size() == mesh->n_vertices() ? &warm_p : nullptr;
        DiscreteSolution sol = solve_ocp(*mesh, spec, solver_opts, warm);

        IterationRecord rec;
        rec.k = k;
        rec.n_elem = mesh->n_elements();
        rec.n_dof = mesh->n_interior_vertices();
        if (!sol.converged) {
            rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.history.records.push_back(rec);
            result.history.failed = true;
            result.final_mesh = mesh;
            result.final_solution = std::move(sol);
            std::cerr << "afem_loop: solver failed to converge at iteration " << k
                      << " (defect " << sol.fixed_point_defect << ")\n";
            return result;
        }

        const IndicatorSet ind = total_indicators(*mesh, sol, spec, opts.estimator);
        rec.eta_y = std::sqrt(ind.total_eta2_y());
        rec.eta_p = std::sqrt(ind.total_eta2_p());
        rec.eta = std::sqrt(ind.total_eta2());
        rec.osc = std::sqrt(ind.total_osc2());
        rec.grading = grading_norm(*mesh);
        if (rec.grading > opts.mu_warn)
            std::cerr << "afem_loop: grading norm " << rec.grading << " exceeds mu-warn threshold "
                      << opts.mu_warn << " at iteration " << k << "\n";
        if (spec.exact) {
            const ExactErrors err = exact_errors(*mesh, sol, *spec.exact, spec,
                                                 opts.estimator.interior_quad_order);
            rec.err_u = err.u;
            rec.err_y = err.y;
            rec.err_p = err.p;
            const double err_osc = err.combined() + rec.osc;
            if (prev_err_osc > 0.0) rec.ratio_err = err_osc / prev_err_osc;
            prev_err_osc = err_osc;
        }
        if (prev_eta > 0.0) rec.ratio_eta = rec.eta / prev_eta;
        prev_eta = rec.eta;

        const bool stop = (opts.max_iters >= 0 && k + 1 >= opts.max_iters) ||
                          (opts.max_dofs >= 0 && rec.n_dof >= opts.max_dofs) ||
                          (opts.eta_stop > 0.0 && rec.eta <= opts.eta_stop);

        MarkResult mark;
        if (!stop) {
            if (opts.uniform) {
                mark.marked.resize(mesh->n_elements());
                std::iota(mark.marked.begin(), mark.marked.end(), 0);
            } else {
                mark = doerfler_mark(ind, opts.theta);
            }
            rec.marked = static_cast<long>(mark.marked.size());
        }
        rec.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        result.history.records.push_back(rec);
        if (observer) observer(rec, *mesh, sol, ind);

        if (stop || mark.marked.empty()) {
            result.final_mesh = mesh;
            result.final_solution = std::move(sol);
            return result;
        }

        RefineResult refined = refine(*mesh, mark.marked, opts.r);
        // Nodal injection of the adjoint iterate: nested P1 spaces make the
        // midpoint average exact.
        warm_p.resize(refined.mesh.n_vertices());
        warm_p.head(mesh->n_vertices()) = sol.p.values;
        for (std::size_t i = 0; i < refined.new_vertex_parents.size(); ++i) {
            const auto& pr = refined.new_vertex_parents[i];
            const int v = mesh->n_vertices() + static_cast<int>(i);
            warm_p[v] = 0.5 * (warm_p[pr[0]] + warm_p[pr[1]]);
        }
        mesh = std::make_shared<Mesh>(std::move(refined.mesh));
    }
}

std::vector<double> eoc_pairwise(const std::vector<double>& quantity,
                                 const std::vector<long>& dofs) {
    if (quantity.size() != dofs.size())
        throw std::invalid_argument("eoc_pairwise: size mismatch");
    std::vector<double> slopes;
    for (std::size_t i = 0; i + 1 < quantity.size(); ++i) {
        if (quantity[i] <= 0.0 || quantity[i + 1] <= 0.0) {
            std::cerr << "eoc_pairwise: skipping non-positive quantity at record " << i << "\n";
            continue;
        }
        if (dofs[i + 1] == dofs[i]) continue;
        slopes.push_back(-std::log(quantity[i + 1] / quantity[i]) /
                         std::log(static_cast<double>(dofs[i + 1]) / dofs[i]));
    }
    return slopes;
}

double least_squares_slope(const std::vector<double>& quantity, const std::vector<long>& dofs,
                           int window) {
    std::vector<double> lx, ly;
    for (std::size_t i = 0; i < quantity.size(); ++i) {
        if (quantity[i] <= 0.0 || dofs[i] <= 0) continue;
        lx.push_back(std::log(static_cast<double>(dofs[i])));
        ly.push_back(std::log(quantity[i]));
    }
    if (static_cast<int>(lx.size()) > window) {
        lx.erase(lx.begin(), lx.end() - window);
        ly.erase(ly.begin(), ly.end() - window);
    }
    const std::size_t n = lx.size();
    if (n < 2) throw std::invalid_argument("least_squares_slope: need >= 2 usable records");
    const double mx = std::accumulate(lx.begin(), lx.end(), 0.0) / n;
    const double my = std::accumulate(ly.begin(), ly.end(), 0.0) / n;
    double num = 0.0, den = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        num += (lx[i] - mx) * (ly[i] - my);
        den += (lx[i] - mx) * (lx[i] - mx);
    }
    return num / den;
}

ContractionReport contraction_report(const AdaptiveHistory& history) {
    ContractionReport rep;
    for (const auto& rec : history.records) {
        if (rec.ratio_err) rep.ratio_err_osc.push_back(*rec.ratio_err);
        if (rec.ratio_eta) rep.ratio_eta.push_back(*rec.ratio_eta);
    }
    return rep;
}

std::vector<double> history_column(const AdaptiveHistory& history, const std::string& name) {
    std::vector<double> col;
    for (const auto& r : history.records) {
        if (name == "eta") col.push_back(r.eta);
        else if (name == "eta_y") col.push_back(r.eta_y);
        else if (name == "eta_p") col.push_back(r.eta_p);
        else if (name == "osc") col.push_back(r.osc);
        else if (name == "err") col.push_back(r.combined_error().value_or(-1.0));
        else if (name == "err_u") col.push_back(r.err_u.value_or(-1.0));
        else if (name == "err_y") col.push_back(r.err_y.value_or(-1.0));
        else if (name == "err_p") col.push_back(r.err_p.value_or(-1.0));
        else throw std::invalid_argument("history_column: unknown column " + name);
    }
    return col;
}

std::vector<long> history_dofs(const AdaptiveHistory& history) {
    std::vector<long> dofs;
    for (const auto& r : history.records) dofs.push_back(r.n_dof);
    return dofs;
}

namespace {

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.12g", v);
    return buf;
}

std::string fmt_opt(const std::optional<double>& v) {
    return v ? fmt_double(*v) : std::string();
}

}  // namespace

std::string history_csv_string(const AdaptiveHistory& history) {
    std::ostringstream out;
    out << "k,n_elem,n_dof,eta,eta_y,eta_p,osc,err_u,err_y,err_p,grading,marked,"
           "ratio_err,ratio_eta,seconds\n";
    for (const auto& r : history.records) {
        out << r.k << ',' << r.n_elem << ',' << r.n_dof << ',' << fmt_double(r.eta) << ','
            << fmt_double(r.eta_y) << ',' << fmt_double(r.eta_p) << ',' << fmt_double(r.osc)
            << ',' << fmt_opt(r.err_u) << ',' << fmt_opt(r.err_y) << ',' << fmt_opt(r.err_p)
            << ',' << fmt_double(r.grading) << ',' << r.marked << ',' << fmt_opt(r.ratio_err)
            << ',' << fmt_opt(r.ratio_eta) << ',' << fmt_double(r.seconds) << '\n';
    }
    return out.str();
}

void write_history_csv(const AdaptiveHistory& history, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("write_history_csv: cannot open " + path);
    out << history_csv_string(history);
    if (!out) throw std::runtime_error("write_history_csv: write failed for " + path);
}

AdaptiveHistory read_history_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("read_history_csv: cannot open " + path);
    std::string line;
    if (!std::getline(in, line)) throw std::runtime_error("read_history_csv: empty file " + path);
    const std::string expected =
        "k,n_elem,n_dof,eta,eta_y,eta_p,osc,err_u,err_y,err_p,grading,marked,"
        "ratio_err,ratio_eta,seconds";
    if (line != expected)
        throw std::runtime_error("read_history_csv: unexpected header in " + path);
    AdaptiveHistory hist;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> cells;
        std::string cell;
        std::istringstream row(line);
        while (std::getline(row, cell, ',')) cells.push_back(cell);
        while (cells.size() < 15) cells.emplace_back();
        auto opt = [](const std::string& s) -> std::optional<double> {
            if (s.empty()) return std::nullopt;
            return std::stod(s);
        };
        IterationRecord rec;
        rec.k = std::stoi(cells[0]);
        rec.n_elem = std::stol(cells[1]);
        rec.n_dof = std::stol(cells[2]);
        rec.eta = std::stod(cells[3]);
        rec.eta_y = std::stod(cells[4]);
        rec.eta_p = std::stod(cells[5]);
        rec.osc = std::stod(cells[6]);
        rec.err_u = opt(cells[7]);
        rec.err_y = opt(cells[8]);
        rec.err_p = opt(cells[9]);
        rec.grading = std::stod(cells[10]);
        rec.marked = std::stol(cells[11]);
        rec.ratio_err = opt(cells[12]);
        rec.ratio_eta = opt(cells[13]);
        rec.seconds = std::stod(cells[14]);
        hist.records.push_back(rec);
    }
    return hist;
}

}  // namespace afem
