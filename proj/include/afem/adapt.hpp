#pragma once

#include "afem/estimator.hpp"
#include "afem/problems.hpp"

#include <functional>
#include <limits>
#include <memory>
#include <optional>

namespace afem {

struct AdaptOptions {
    double theta = 0.3;          // in (0,1]; 1 with uniform=true marks everything
    int r = 1;                   // bisections per marked element
    long max_dofs = -1;          // stop once interior DOFs reach this (-1: off)
    int max_iters = -1;          // stop after this many records (-1: off)
    double eta_stop = 0.0;       // stop once eta falls below
    bool uniform = false;        // mark all elements each iteration
    int initial_n = 8;           // subdivisions of the initial criss-cross mesh
    int contraction_skip = 5;    // pre-asymptotic records excluded from stats
    double mu_warn = std::numeric_limits<double>::infinity();
    EstimatorOptions estimator;

    void validate() const;
};

struct IterationRecord {
    int k = 0;
    long n_elem = 0;
    long n_dof = 0;  // interior vertices
    double eta = 0.0, eta_y = 0.0, eta_p = 0.0;
    double osc = 0.0;
    std::optional<double> err_u, err_y, err_p;
    double grading = 0.0;
    long marked = 0;
    std::optional<double> ratio_err;  // (err+osc)_k / (err+osc)_{k-1}
    std::optional<double> ratio_eta;
    double seconds = 0.0;

    std::optional<double> combined_error() const {
        if (err_u && err_y && err_p) return *err_u + *err_y + *err_p;
        return std::nullopt;
    }
};

struct AdaptiveHistory {
    std::vector<IterationRecord> records;
    bool failed = false;
    double lambda = 0.0;  // 1 - 2^{-3r/d}, d = 2
};

struct AfemResult {
    AdaptiveHistory history;
    /// Held behind a stable address: final_solution's fields point into it.
    std::shared_ptr<const Mesh> final_mesh;
    DiscreteSolution final_solution;
};

struct MarkResult {
    ElementSet marked;
    bool estimator_zero = false;
};

/// Estimator reduction rate of Lemma-type diagnostics: 1 - 2^{-3r/d}.
double contraction_lambda(int r, int d = 2);

/// Doerfler bulk marking: minimal set with sum eta^2 >= theta^2 * total,
/// greedy by descending eta^2 with ascending-id tie break.
MarkResult doerfler_mark(const Eigen::VectorXd& eta2, double theta);
MarkResult doerfler_mark(const IndicatorSet& indicators, double theta);

/// Called after ESTIMATE on every iteration (snapshot emission etc.).
using IterationObserver =
    std::function<void(const IterationRecord&, const Mesh&, const DiscreteSolution&,
                       const IndicatorSet&)>;

/// SOLVE -> ESTIMATE -> MARK -> REFINE until a stop rule fires.
AfemResult afem_loop(const ProblemSpec& spec, const AdaptOptions& opts,
                     const SolverOptions& solver_opts = {},
                     const IterationObserver& observer = nullptr);

/// Pairwise orders s_k = -log(q_{k+1}/q_k) / log(N_{k+1}/N_k); non-positive
/// quantities are skipped.
std::vector<double> eoc_pairwise(const std::vector<double>& quantity,
                                 const std::vector<long>& dofs);

/// Least-squares slope of log(q) against log(N) over the last `window`
/// usable records (signed: -1 means first-order decay against DOFs).
double least_squares_slope(const std::vector<double>& quantity, const std::vector<long>& dofs,
                           int window);

struct ContractionReport {
    std::vector<double> ratio_err_osc;  // consecutive ratios of (error + osc)
    std::vector<double> ratio_eta;
};
ContractionReport contraction_report(const AdaptiveHistory& history);

/// Column extraction helpers for EOC reporting.
std::vector<double> history_column(const AdaptiveHistory& history, const std::string& name);
std::vector<long> history_dofs(const AdaptiveHistory& history);

/// CSV with the fixed header
/// k,n_elem,n_dof,eta,eta_y,eta_p,osc,err_u,err_y,err_p,grading,marked,ratio_err,ratio_eta,seconds
void write_history_csv(const AdaptiveHistory& history, const std::string& path);
std::string history_csv_string(const AdaptiveHistory& history);
AdaptiveHistory read_history_csv(const std::string& path);

}  // namespace afem
