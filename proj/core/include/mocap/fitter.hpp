#pragma once

#include <optional>
#include <vector>

#include "mocap/autoencoder.hpp"
#include "mocap/body_model.hpp"

namespace mocap {

/// One body-fitting task: model, pose prior, landmark targets and the
/// observation mask (markers only, or markers and joints).
struct FitProblem {
    const BodyModel* model = nullptr;
    const Autoencoder* ae = nullptr;  // required unless direct_theta
    Points targets;                   // L x 3; rows meaningful where observed
    std::vector<bool> observed;       // size L, >= 4 set
};

enum class FitMode { noise_aware, plain, barron };

struct AnnealRound {
    int iterations = 50;
    double data_weight = 1.0;
};

struct FitConfig {
    FitMode mode = FitMode::noise_aware;
    double lambda_beta = 1e-3;
    double lambda_z = 1e-3;
    /// Annealing rounds applied per stage.
    std::vector<AnnealRound> schedule = {{40, 1.0}, {40, 2.0}, {80, 4.0}};
    double sigma_init = 0.02;  // meters, frozen in stage 1
    double sigma_min = 1e-3;
    double sigma_max = 1.0;
    double grad_tol = 1e-7;
    double step_tol = 1e-12;
    /// Use ||r||^2 instead of the printed ||r|| in the data term.
    bool squared_residual = false;
    /// Optimize theta directly and drop the latent prior.
    bool direct_theta = false;
    double barron_alpha_min = -7.0;
    double barron_alpha_max = 4.0;
    double barron_alpha_init = -4.5;
    double barron_scale_init = 0.05;  // meters
    /// Warm start; otherwise rest pose, zero shape, root from a rigid
    /// three-marker alignment.
    std::optional<BodyParams> initial;
};

/// Flat optimization state. The packed vector layout is
/// [beta | pose (z or theta) | root omega (3) | root t (3) |
///  log sigma (one per observed landmark) | alpha, log scale (barron)].
struct FitState {
    Vec beta;
    Vec pose;
    Vec3 root_omega = Vec3::Zero();
    Vec3 root_t = Vec3::Zero();
    Vec log_sigma;
    double barron_alpha = -4.5;
    double barron_log_scale = 0.0;
};

struct StateLayout {
    int beta_offset = 0, beta_size = 0;
    int pose_offset = 0, pose_size = 0;
    int omega_offset = 0, t_offset = 0;
    int log_sigma_offset = 0, log_sigma_size = 0;
    int barron_offset = -1;  // -1 when not in barron mode
    int total = 0;
};

StateLayout state_layout(const FitProblem& problem, const FitConfig& config);
Vec pack_state(const FitProblem& problem, const FitConfig& config, const FitState& state);
FitState unpack_state(const FitProblem& problem, const FitConfig& config, const Vec& packed);

/// Total energy (data weight w on the data term, priors unweighted).
double fit_energy(const FitProblem& problem, const FitConfig& config, const FitState& state,
                  double data_weight = 1.0);

/// Analytic gradient of fit_energy over the packed state.
Vec fit_gradient(const FitProblem& problem, const FitConfig& config, const FitState& state,
                 double data_weight = 1.0);

/// Quasi-Newton minimization over a subset of packed-state indices with
/// the sigma (and Barron) bounds enforced by projection. Exposed for
/// validation; fit() drives it per stage.
struct MinimizeOutcome {
    FitState state;
    double energy = 0.0;
    int iterations = 0;
    bool converged = false;
};
MinimizeOutcome minimize_state(const FitProblem& problem, const FitConfig& config, FitState start,
                               const std::vector<int>& free_indices, double data_weight,
                               int max_iterations);

struct FitResult {
    BodyParams params;
    Vec z;           // empty in direct-theta mode
    Vec sigma;       // per landmark, model order
    double energy = 0.0;
    bool converged = false;
    std::vector<int> stage_iterations;
    Vec residuals;   // per-landmark distance at the solution, -1 unobserved
};

/// Two-stage noise-aware fit: stage 1 over (beta, pose, root) with sigma
/// frozen, stage 2 over (pose, log sigma) with beta and root frozen, data
/// weight annealed per the schedule in both stages.
FitResult fit(const FitProblem& problem, const FitConfig& config = {});

/// Single-stage baseline with uniform fixed sigma = 1.
FitResult plain_fit(const FitProblem& problem, FitConfig config = {});

/// Adaptive robust baseline: the data term is the general robust penalty
/// with shape alpha (bounded to the given range) and scale optimized in
/// stage 2 alongside the pose.
FitResult barron_fit(const FitProblem& problem, FitConfig config, double alpha_min,
                     double alpha_max, double alpha_init);

/// General robust penalty and its x-derivative (shape alpha, scale c).
double barron_rho(double x, double alpha, double c);
double barron_drho_dx(double x, double alpha, double c);

}  // namespace mocap
