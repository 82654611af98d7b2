#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "phenoflow/driver.hpp"
#include "phenoflow/oracles.hpp"
#include "phenoflow/solver.hpp"

using namespace phenoflow;

namespace {

PopulationField box_data(const SpatialGrid& grid, const PhenotypeMesh& mesh, double lo,
                         double hi, double rho0) {
    PopulationField n(grid, mesh);
    for (int l = 0; l < mesh.size(); ++l)
        for (int j = 0; j < grid.ny(); ++j)
            for (int i = 0; i < grid.nx(); ++i) {
                const double x = grid.center(0, i);
                if (x >= lo && x <= hi) n.layer(l)(i, j) = rho0;
            }
    return n;
}

double total_mass(const SimulationState& state) {
    double mass = 0.0;
    for (int l = 0; l < state.mesh.size(); ++l)
        for (int j = 0; j < state.grid.ny(); ++j)
            for (int i = 0; i < state.grid.nx(); ++i)
                mass += state.mesh.weight(l) * state.grid.cell_volume() *
                        state.n.layer(l)(i, j);
    return mass;
}

}  // namespace

TEST_CASE("stable_dt formula") {
    SECTION("diffusion-bound case") {
        // h = 0.01, d = 1, gamma = 2, p <= 1, eps = 0, ||R|| = 1, cfl = 1
        SpatialGrid grid(0.0, 1.0, 100);
        PhenotypeMesh mesh(1);
        PopulationField n(grid, mesh);
        for (int i = 0; i < 100; ++i) n.layer(0)(i) = 1.0;
        SolverConfig config;
        config.model.gamma = 2.0;
        config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.0, 1.0);
        config.cfl = 1.0;
        const SimulationState state = make_state(grid, mesh, n, config.model);
        CHECK(stable_dt(state, config) == Catch::Approx(2.5e-5).epsilon(1e-12));
    }

    SECTION("viscosity-dominated vacuum") {
        SpatialGrid grid(0.0, 1.0, 100);
        PhenotypeMesh mesh(1);
        SolverConfig config;
        config.model.gamma = 2.0;
        config.model.epsilon = 0.1;
        config.model.reaction = ReactionSpec::none();
        config.cfl = 1.0;
        const SimulationState state =
            make_state(grid, mesh, PopulationField(grid, mesh), config.model);
        const double h = grid.spacing();
        CHECK(stable_dt(state, config) == Catch::Approx(h * h / 0.2).epsilon(1e-12));
    }

    SECTION("doubling h quadruples the diffusive bound") {
        PhenotypeMesh mesh(1);
        SolverConfig config;
        config.model.epsilon = 0.1;
        config.model.reaction = ReactionSpec::none();
        config.cfl = 1.0;
        SpatialGrid fine(0.0, 1.0, 200), coarse(0.0, 1.0, 100);
        const double dt_fine = stable_dt(
            make_state(fine, mesh, PopulationField(fine, mesh), config.model), config);
        const double dt_coarse = stable_dt(
            make_state(coarse, mesh, PopulationField(coarse, mesh), config.model), config);
        CHECK(dt_coarse == Catch::Approx(4.0 * dt_fine).epsilon(1e-12));
    }

    SECTION("reaction cap") {
        SpatialGrid grid(0.0, 1.0, 4);
        PhenotypeMesh mesh(1);
        SolverConfig config;
        config.model.reaction = ReactionSpec::linear_inhibition(4.0, 0.0, 1.0);
        config.cfl = 1.0;
        const SimulationState state =
            make_state(grid, mesh, PopulationField(grid, mesh), config.model);
        CHECK(stable_dt(state, config) == Catch::Approx(1.0 / 8.0));
    }
}

TEST_CASE("vacuum is a fixed point of the step") {
    SpatialGrid grid(-1.0, 1.0, 32);
    PhenotypeMesh mesh(2);
    SolverConfig config;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.5, 1.0);
    SimulationState state = make_state(grid, mesh, PopulationField(grid, mesh), config.model);
    step(state, 1e-3, config);
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 32; ++i) CHECK(state.n.layer(l)(i) == 0.0);
}

TEST_CASE("conservative flux keeps mass exact with zero reaction") {
    SpatialGrid grid(-3.0, 3.0, 96);
    PhenotypeMesh mesh(2);
    SolverConfig config;
    config.model.gamma = 2.0;
    config.model.reaction = ReactionSpec::none();

    PopulationField n(grid, mesh);
    n.layer(0)(48) = 1.0;  // single loaded cell in vacuum
    n.layer(1)(48) = 0.5;
    SimulationState state = make_state(grid, mesh, n, config.model);
    const double mass0 = total_mass(state);

    for (int k = 0; k < 800; ++k) step(state, stable_dt(state, config), config);
    CHECK(total_mass(state) == Catch::Approx(mass0).epsilon(1e-13));
    CHECK(state.flushed_cells == 0);
}

TEST_CASE("spatially uniform data reduce to forward Euler of the reaction") {
    SpatialGrid grid(-4.0, 4.0, 64);
    PhenotypeMesh mesh(1);
    SolverConfig config;
    config.model.gamma = 2.0;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.0, 1.0);
    config.contact = BoundaryContactPolicy::Warn;  // the flat profile spans the domain

    PopulationField n(grid, mesh);
    for (int i = 0; i < 64; ++i) n.layer(0)(i) = 0.5;
    SimulationState state = make_state(grid, mesh, n, config.model);

    const double dt = 0.2 * stable_dt(state, config);
    const double y0 = mesh.node(0);
    double euler = 0.5;
    for (int k = 0; k < 10; ++k) {
        step(state, dt, config);
        const double p = std::pow(euler, 2.0);
        euler = euler + dt * euler * reaction_rate(y0, p, config.model.reaction);
        CHECK(state.n.layer(0)(32) == Catch::Approx(euler).epsilon(1e-13));
    }

    // against the RK4 reference: per-step defect of forward Euler is O(dt^2)
    const auto oracle =
        ode_reference({0.5}, config.model.reaction, mesh, 2.0, 10 * dt, 1e-6);
    CHECK(std::abs(state.n.layer(0)(32) - oracle[0]) <= 20.0 * 10 * dt * dt);
}

TEST_CASE("run with zero end time returns the initial state") {
    SpatialGrid grid(-2.0, 2.0, 32);
    PhenotypeMesh mesh(1);
    SolverConfig config;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.0, 1.0);
    config.t_end = 0.0;
    const PopulationField n = box_data(grid, mesh, -0.5, 0.5, 0.5);
    const RunResult result = run(n, grid, mesh, config);
    CHECK(result.monitors.steps == 0);
    CHECK(result.state.t == 0.0);
    CHECK(result.state.n.layer(0)(16) == n.layer(0)(16));
}

TEST_CASE("Gronwall mass bound and L-infinity bound under growth") {
    SpatialGrid grid(-3.0, 3.0, 150);
    PhenotypeMesh mesh(2);
    SolverConfig config;
    config.model.gamma = 3.0;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.5, 1.0);
    config.t_end = 0.4;

    const PopulationField n = box_data(grid, mesh, -0.5, 0.5, 0.6);
    const RunResult result = run(n, grid, mesh, config);
    CHECK(result.monitors.gronwall_max_ratio <= 1.0 + 1e-10);
    const double rho_m = config.model.rho_max();
    CHECK(result.monitors.sup_rho_max <= rho_m * (1.0 + 10.0 * grid.spacing()));
    CHECK(result.monitors.flushed_cells == 0);
    CHECK_FALSE(result.monitors.boundary_contact);
}

TEST_CASE("relative mass drift stays at roundoff for conservative runs") {
    SpatialGrid grid(-4.0, 4.0, 200);
    PhenotypeMesh mesh(1);
    SolverConfig config;
    config.model.gamma = 2.0;
    config.model.reaction = ReactionSpec::none();
    config.override_assumptions = true;
    config.t_end = 0.05;

    PopulationField n(grid, mesh);
    for (int i = 0; i < 200; ++i) {
        const double x = grid.center(0, i);
        n.layer(0)(i) = std::max(0.6 * (1.0 - x * x), 0.0);
    }
    const RunResult result = run(n, grid, mesh, config);
    INFO("steps " << result.monitors.steps << ", drift " << result.monitors.mass_drift_rel);
    CHECK(result.monitors.mass_drift_rel <=
          1e-13 * std::max(1.0, result.monitors.steps / 1000.0));
}

TEST_CASE("layer sum consistency between structured and density-only steps") {
    SpatialGrid grid(-2.0, 2.0, 80);
    PhenotypeMesh mesh(3);
    SolverConfig config;
    config.model.gamma = 2.0;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.0, 1.0);  // trait-independent
    config.t_end = 0.5;

    PopulationField n = box_data(grid, mesh, -0.5, 0.5, 0.4);
    // non-uniform trait loading; the sum property must still hold
    for (int i = 0; i < 80; ++i) {
        n.layer(0)(i) *= 1.5;
        n.layer(2)(i) *= 0.5;
    }

    SECTION("inviscid") {
        const ConsistencyResult r = layer_sum_consistency(n, grid, mesh, config, 300);
        INFO("steps " << r.steps << ", final gap " << r.final_gap);
        CHECK(r.steps > 0);
        CHECK(r.max_gap_per_step <= 1e-12);
    }

    SECTION("with viscosity") {
        config.model.epsilon = 0.05;
        config.contact = BoundaryContactPolicy::Warn;  // viscous tails fill the domain
        const ConsistencyResult r = layer_sum_consistency(n, grid, mesh, config, 300);
        CHECK(r.max_gap_per_step <= 1e-12);
    }
}

TEST_CASE("density-only step fixed points") {
    SpatialGrid grid(-1.0, 1.0, 32);
    PhenotypeMesh mesh(1);
    SolverConfig config;
    config.model.gamma = 2.0;
    config.model.reaction = ReactionSpec::none();

    SECTION("vacuum") {
        ScalarField rho(grid);
        const ScalarField out = step_density_only(rho, 1e-3, config, grid, mesh);
        for (int i = 0; i < 32; ++i) CHECK(out(i) == 0.0);
    }

    SECTION("constant density is stationary away from the Dirichlet boundary") {
        ScalarField rho(grid, 0.7);
        const double dt = 0.5 * stable_dt_density(rho, config, grid, mesh);
        const ScalarField out = step_density_only(rho, dt, config, grid, mesh);
        for (int i = 2; i < 30; ++i) CHECK(out(i) == 0.7);
        // boundary cells decay through the ghost faces; expected behavior
        CHECK(out(0) < 0.7);
        CHECK(out(31) < 0.7);
    }
}

TEST_CASE("boundary contact policy") {
    SpatialGrid grid(-1.0, 1.0, 32);
    PhenotypeMesh mesh(1);
    SolverConfig config;
    config.model.gamma = 2.0;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.0, 1.0);
    config.t_end = 0.1;

    PopulationField n(grid, mesh);
    for (int i = 0; i < 32; ++i) n.layer(0)(i) = 0.5;  // support touches both ends

    SECTION("abort policy throws") {
        config.contact = BoundaryContactPolicy::Abort;
        CHECK_THROWS_AS(run(n, grid, mesh, config), BoundaryContactError);
    }

    SECTION("warn policy records the contact and completes") {
        config.contact = BoundaryContactPolicy::Warn;
        const RunResult result = run(n, grid, mesh, config);
        CHECK(result.monitors.boundary_contact);
        CHECK(result.state.t == Catch::Approx(0.1));
    }
}

TEST_CASE("violating the CFL precondition is caught by the guards") {
    SpatialGrid grid(-1.0, 1.0, 64);
    PhenotypeMesh mesh(1);
    SolverConfig config;
    config.model.gamma = 2.0;
    config.model.reaction = ReactionSpec::none();

    PopulationField n = box_data(grid, mesh, -0.4, 0.4, 1.0);
    SimulationState state = make_state(grid, mesh, n, config.model);
    const double dt = 5000.0 * stable_dt(state, config);
    CHECK_THROWS_AS(
        [&] {
            for (int k = 0; k < 50; ++k) step(state, dt, config);
        }(),
        SolverError);
}

TEST_CASE("mutation mode without a kernel is a mode error") {
    SpatialGrid grid(-1.0, 1.0, 16);
    PhenotypeMesh mesh(2);
    SolverConfig config;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.0, 1.0);
    config.mutation_mode = true;
    SimulationState state =
        make_state(grid, mesh, box_data(grid, mesh, -0.5, 0.5, 0.2), config.model);
    CHECK_THROWS_AS(step(state, 1e-4, config), SolverError);
}

TEST_CASE("mutation mode with a diagonal kernel matches the diagonal reaction") {
    SpatialGrid grid(-1.0, 1.0, 32);
    PhenotypeMesh mesh(2);
    const ReactionSpec spec = ReactionSpec::linear_inhibition(1.0, 0.5, 1.0);

    MutationKernel kernel;
    kernel.p_samples = {0.0, 1.0, 2.0};
    kernel.values.resize(2);
    for (int eta = 0; eta < 2; ++eta) {
        kernel.values[eta].resize(2);
        for (int y = 0; y < 2; ++y)
            for (double p : kernel.p_samples)
                kernel.values[eta][y].push_back(
                    eta == y ? mesh.size() * reaction_rate(mesh.node(y), p, spec) : 0.0);
    }

    SolverConfig diag;
    diag.model.gamma = 2.0;
    diag.model.reaction = spec;

    SolverConfig mut = diag;
    mut.model.mutation = kernel;
    mut.mutation_mode = true;

    SimulationState a = make_state(grid, mesh, box_data(grid, mesh, -0.5, 0.5, 0.3), diag.model);
    SimulationState b = make_state(grid, mesh, box_data(grid, mesh, -0.5, 0.5, 0.3), mut.model);
    for (int k = 0; k < 25; ++k) {
        const double dt = std::min(stable_dt(a, diag), stable_dt(b, mut));
        step(a, dt, diag);
        step(b, dt, mut);
    }
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 32; ++i)
            CHECK(b.n.layer(l)(i) == Catch::Approx(a.n.layer(l)(i)).margin(1e-12));
}

TEST_CASE("viscous mode respects the lower barrier of the lifted data") {
    SpatialGrid grid(-5.0, 5.0, 100);
    PhenotypeMesh mesh(1);
    SolverConfig config;
    config.model.gamma = 2.0;
    config.model.epsilon = 0.05;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.0, 1.0);
    config.t_end = 0.1;
    config.contact = BoundaryContactPolicy::Warn;  // lifted data fill the domain

    const PopulationField zero(grid, mesh);
    double worst = std::numeric_limits<double>::infinity();
    run(zero, grid, mesh, config,
        [&](const SimulationState& s) { worst = std::min(worst, subsolution_ratio(s, config)); });
    INFO("worst barrier ratio " << worst);
    CHECK(worst >= 0.9);
}

TEST_CASE("runs are deterministic") {
    SpatialGrid grid(-2.0, 2.0, 64);
    PhenotypeMesh mesh(2);
    SolverConfig config;
    config.model.gamma = 3.0;
    config.model.reaction = ReactionSpec::linear_inhibition(1.0, 0.5, 1.0);
    config.t_end = 0.2;
    const PopulationField n = box_data(grid, mesh, -0.5, 0.5, 0.5);
    const RunResult a = run(n, grid, mesh, config);
    const RunResult b = run(n, grid, mesh, config);
    CHECK(a.monitors.steps == b.monitors.steps);
    for (int l = 0; l < 2; ++l)
        for (int i = 0; i < 64; ++i)
            CHECK(a.state.n.layer(l)(i) == b.state.n.layer(l)(i));  // bitwise
}
