#include <doctest.h>

#include <cmath>

#include "petnn/cell.hpp"
#include "petnn/errors.hpp"
#include "scalar_reference.hpp"

using namespace petnn;

namespace {

CellConfig small_config(std::size_t d, std::size_t h) {
    CellConfig cfg;
    cfg.input_dim = d;
    cfg.hidden_dim = h;
    return cfg;
}

CellParams random_params(const CellConfig& cfg, std::uint64_t seed) {
    Rng rng(seed);
    CellParams p(cfg);
    p.init(rng, InitScheme::glorot_uniform);
    visit_blocks(p, [&](const char* name, std::vector<double>& block) {
        if (name[0] == 'b')
            for (double& v : block) v = rng.uniform(-0.5, 0.5);
    });
    return p;
}

CellState random_state(std::size_t h, Rng& rng) {
    CellState st(h);
    for (std::size_t i = 0; i < h; ++i) {
        st.t[i] = rng.uniform(0.0, 1.5);
        st.c[i] = rng.uniform(-1.0, 1.0);
        st.s[i] = rng.uniform(-0.8, 0.8);
    }
    return st;
}

Vector random_input(std::size_t d, Rng& rng) {
    Vector x(d);
    for (std::size_t j = 0; j < d; ++j) x[j] = rng.uniform(-1.0, 1.0);
    return x;
}

}  // namespace

TEST_CASE("config validation rejects degenerate dims") {
    CellConfig cfg = small_config(0, 4);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config(2, 0);
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
    cfg = small_config(2, 2);
    cfg.time_activation = Activation::identity;
    CHECK_THROWS_AS(cfg.validate(), std::invalid_argument);
}

TEST_CASE("compute_gates: zero weights pass the bias through") {
    CellConfig cfg = small_config(2, 3);
    CellParams p(cfg);
    p.b_zt.fill(1.0);
    p.b_zc.fill(1.0);
    p.b_zw.fill(1.0);
    const Gates g = compute_gates(p, Vector{0.3, -0.7}, Vector{0.1, 0.2, 0.3});
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(g.z_t[i] == 1.0);
        CHECK(g.z_c[i] == 1.0);
        CHECK(g.z_w_raw[i] == 1.0);
    }
}

TEST_CASE("compute_gates: identity block on x recovers x") {
    CellConfig cfg = small_config(3, 3);
    CellParams p(cfg);
    for (std::size_t i = 0; i < 3; ++i) p.w_zt(i, i) = 1.0;  // identity on the x part
    const Gates g = compute_gates(p, Vector{2.0, -1.0, 0.5}, Vector(3, 0.0));
    CHECK(g.z_t[0] == 2.0);
    CHECK(g.z_t[1] == -1.0);
    CHECK(g.z_t[2] == 0.5);
}

TEST_CASE("compute_gates matches a scalar affine oracle") {
    CellConfig cfg = small_config(2, 3);
    CellParams p = random_params(cfg, 11);
    Rng rng(12);
    const Vector x = random_input(2, rng);
    const Vector s = random_input(3, rng);
    const Gates g = compute_gates(p, x, s);
    for (std::size_t i = 0; i < 3; ++i) {
        double expect = p.b_zt[i];
        for (std::size_t j = 0; j < 2; ++j) expect += p.w_zt(i, j) * x[j];
        for (std::size_t j = 0; j < 3; ++j) expect += p.w_zt(i, 2 + j) * s[j];
        CHECK(std::abs(g.z_t[i] - expect) < 1e-14);
    }
}

TEST_CASE("compute_ground_and_decay sees only x") {
    CellConfig cfg = small_config(2, 4);
    CellParams p(cfg);
    p.b_ground.fill(0.5);
    p.b_decay.fill(1.0);
    const GroundDecay gd = compute_ground_and_decay(p, Vector{0.0, 0.0});
    for (std::size_t i = 0; i < 4; ++i) {
        CHECK(gd.ground[i] == 0.5);
        CHECK(gd.decay[i] == 1.0);
    }

    CellParams q = random_params(cfg, 21);
    Rng rng(22);
    const Vector x = random_input(2, rng);
    const GroundDecay r = compute_ground_and_decay(q, x);
    for (std::size_t i = 0; i < 4; ++i) {
        double expect = q.b_ground[i];
        for (std::size_t j = 0; j < 2; ++j) expect += q.w_ground(i, j) * x[j];
        CHECK(std::abs(r.ground[i] - expect) < 1e-14);
    }
}

TEST_CASE("update_time evaluates R*act(T+Z)-1") {
    CellConfig cfg = small_config(1, 1);
    SUBCASE("sigma(0) = 0.5 cancels with R=2") {
        const TimeUpdate tu = update_time(Vector{0.0}, Vector{0.0}, Vector{2.0}, cfg);
        CHECK(tu.t_raw[0] == 0.0);
    }
    SUBCASE("zero decay pins the result to -1") {
        const TimeUpdate tu = update_time(Vector{4.2}, Vector{-1.3}, Vector{0.0}, cfg);
        CHECK(tu.t_raw[0] == -1.0);
    }
    SUBCASE("direct evaluation") {
        // oracle: 1.5 * sigmoid(2) - 1, evaluated independently
        const double expect = 1.5 * (1.0 / (1.0 + std::exp(-2.0))) - 1.0;
        const TimeUpdate tu = update_time(Vector{1.0}, Vector{1.0}, Vector{1.5}, cfg);
        CHECK(tu.t_raw[0] == doctest::Approx(expect).epsilon(1e-15));
        CHECK(tu.t_raw[0] == doctest::Approx(0.3211956).epsilon(1e-6));
    }
}

TEST_CASE("compute_switch boundary rules") {
    CellConfig cfg = small_config(1, 1);
    SUBCASE("negative releases") {
        const Switch sw = compute_switch(Vector{-0.3}, cfg);
        CHECK(sw.m[0] == 1.0);
        CHECK(sw.t_new[0] == 0.0);
    }
    SUBCASE("positive retains") {
        const Switch sw = compute_switch(Vector{0.5}, cfg);
        CHECK(sw.m[0] == 0.0);
        CHECK(sw.t_new[0] == 0.5);
    }
    SUBCASE("exact zero releases under the default rule") {
        const Switch sw = compute_switch(Vector{0.0}, cfg);
        CHECK(sw.m[0] == 1.0);
        CHECK(sw.t_new[0] == 0.0);
    }
    SUBCASE("exact zero retains under the strict rule") {
        cfg.boundary_rule = BoundaryRule::release_on_lt_zero;
        const Switch sw = compute_switch(Vector{0.0}, cfg);
        CHECK(sw.m[0] == 0.0);
        CHECK(sw.t_new[0] == 0.0);
    }
}

TEST_CASE("update_cell_state release and retention branches") {
    CHECK(update_cell_state(Vector{5.0}, Vector{1.0}, Vector{0.2}, Vector{0.1})[0] ==
          doctest::Approx(0.3).epsilon(1e-15));
    CHECK(update_cell_state(Vector{5.0}, Vector{0.0}, Vector{123.0}, Vector{0.1})[0] == 5.1);
    const Vector mixed =
        update_cell_state(Vector{2.0, 2.0}, Vector{1.0, 0.0}, Vector{1.0, 1.0}, Vector{0.0, 0.0});
    CHECK(mixed[0] == 1.0);
    CHECK(mixed[1] == 2.0);
}

TEST_CASE("compute_candidate zeroes the memory path on release") {
    CellConfig cfg = small_config(2, 3);
    CellParams p = random_params(cfg, 31);
    Rng rng(32);
    const Vector x = random_input(2, rng);
    const Vector s = random_input(3, rng);
    const Vector c = random_input(3, rng);
    const Candidate with_release = compute_candidate(p, x, s, c, Vector(3, 1.0), cfg);
    const Candidate memoryless = compute_candidate(p, x, Vector(3, 0.0), Vector(3, 0.0),
                                                   Vector(3, 1.0), cfg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(with_release.value[i] == memoryless.value[i]);

    CellParams zero(cfg);
    const Candidate z = compute_candidate(zero, x, s, c, Vector(3, 0.0), cfg);
    for (std::size_t i = 0; i < 3; ++i) CHECK(z.value[i] == 0.0);
}

TEST_CASE("update_hidden mixing endpoints and midpoint") {
    CellConfig cfg = small_config(1, 1);
    cfg.mix_gate_squash = MixGateSquash::none;  // lets the test force w exactly
    cfg.output_activation = Activation::identity;
    CHECK(update_hidden(Vector{0.7}, Vector{-0.2}, Vector{0.0}, cfg).value[0] == 0.7);
    CHECK(update_hidden(Vector{0.7}, Vector{-0.2}, Vector{1.0}, cfg).value[0] == -0.2);
    CHECK(update_hidden(Vector{0.5}, Vector{-0.5}, Vector{0.5}, cfg).value[0] == 0.0);

    cfg.output_activation = Activation::tanh;
    const HiddenUpdate hu = update_hidden(Vector{0.7}, Vector{-0.2}, Vector{0.0}, cfg);
    CHECK(hu.value[0] == doctest::Approx(std::tanh(0.7)).epsilon(1e-15));
}

TEST_CASE("step on the all-zero instance follows the scalar oracle") {
    CellConfig cfg = small_config(2, 3);
    CellParams p(cfg);
    CellState st(3);
    auto [next, trace] = step(p, cfg, st, Vector(2, 0.0));

    scalar_ref::State ref_prev{{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};
    std::vector<double> ref_m;
    const scalar_ref::State ref = scalar_ref::step(p, cfg, ref_prev, {0.0, 0.0}, &ref_m);
    for (std::size_t i = 0; i < 3; ++i) {
        CHECK(trace.m[i] == 1.0);  // R=0 makes T_raw = -1
        CHECK(ref_m[i] == 1.0);
        CHECK(next.t[i] == ref.t[i]);
        CHECK(next.c[i] == ref.c[i]);
        CHECK(next.s[i] == ref.s[i]);
        CHECK(next.t[i] == 0.0);
        CHECK(next.c[i] == 0.0);
        CHECK(next.s[i] == 0.0);
    }
}

TEST_CASE("step retain branch accumulates energy exactly") {
    CellConfig cfg = small_config(2, 3);
    CellParams p = random_params(cfg, 41);
    p.b_decay.fill(3.0);  // R ~ 3 keeps sigma-scaled T_raw above zero
    Rng rng(42);
    CellState st = random_state(3, rng);
    const Vector x(2, 0.0);
    auto [next, trace] = step(p, cfg, st, x);
    for (std::size_t i = 0; i < 3; ++i) {
        REQUIRE(trace.m[i] == 0.0);
        CHECK(next.c[i] == st.c[i] + trace.z_c[i]);
    }
}

TEST_CASE("vectorized step equals the scalar reference on random instances") {
    Rng meta(4242);
    int release_seen = 0, retain_seen = 0;
    for (int iter = 0; iter < 100; ++iter) {
        CellConfig cfg = small_config(1 + meta.below(8), 1 + meta.below(8));
        cfg.boundary_rule = (iter % 2 == 0) ? BoundaryRule::release_on_leq_zero
                                            : BoundaryRule::release_on_lt_zero;
        CellParams p = random_params(cfg, meta.next_u64());
        for (std::size_t i = 0; i < cfg.hidden_dim; ++i)
            p.b_decay[i] = meta.uniform(0.0, 3.0);  // mixes both switch branches
        Rng rng(meta.next_u64());
        CellState st = random_state(cfg.hidden_dim, rng);
        const Vector x = random_input(cfg.input_dim, rng);

        auto [next, trace] = step(p, cfg, st, x);
        scalar_ref::State ref_prev{st.t.data, st.c.data, st.s.data};
        std::vector<double> ref_m;
        const scalar_ref::State ref = scalar_ref::step(p, cfg, ref_prev, x.data, &ref_m);
        for (std::size_t i = 0; i < cfg.hidden_dim; ++i) {
            CHECK(trace.m[i] == ref_m[i]);
            CHECK(std::abs(next.t[i] - ref.t[i]) < 1e-12);
            CHECK(std::abs(next.c[i] - ref.c[i]) < 1e-12);
            CHECK(std::abs(next.s[i] - ref.s[i]) < 1e-12);
            if (trace.m[i] == 1.0)
                ++release_seen;
            else
                ++retain_seen;
        }
    }
    CHECK(release_seen > 0);
    CHECK(retain_seen > 0);
}

TEST_CASE("step trace m entries are exactly zero or one") {
    CellConfig cfg = small_config(3, 5);
    CellParams p = random_params(cfg, 51);
    Rng rng(52);
    for (int iter = 0; iter < 50; ++iter) {
        CellState st = random_state(5, rng);
        auto [next, trace] = step(p, cfg, st, random_input(3, rng));
        for (double m : trace.m.data) CHECK((m == 0.0 || m == 1.0));
        for (double t : next.t.data) CHECK(t >= 0.0);
    }
}

TEST_CASE("default activations keep S inside (-1,1)") {
    CellConfig cfg = small_config(2, 4);
    CellParams p = random_params(cfg, 61);
    Rng rng(62);
    CellState st(4);
    for (int t = 0; t < 200; ++t) {
        auto [next, trace] = step(p, cfg, st, random_input(2, rng));
        for (double s : next.s.data) {
            CHECK(s > -1.0);
            CHECK(s < 1.0);
        }
        st = next;
    }
}

TEST_CASE("quasi_linear with zero mix weights returns the candidate") {
    CellConfig cfg = small_config(2, 3);
    cfg.update_variant = UpdateVariant::quasi_linear;
    CellParams p = random_params(cfg, 71);
    p.w_zw = Matrix(3, 5, 0.0);
    p.b_zw.fill(0.0);
    Rng rng(72);
    CellState st = random_state(3, rng);
    auto [next, trace] = step(p, cfg, st, random_input(2, rng));
    for (std::size_t i = 0; i < 3; ++i) CHECK(next.s[i] == trace.cand[i]);
}

TEST_CASE("traditional gating saturates to pure retention") {
    CellConfig cfg = small_config(2, 3);
    cfg.update_variant = UpdateVariant::traditional_gating;
    CellParams p = random_params(cfg, 81);
    p.w_forget = Matrix(3, 5, 0.0);
    p.w_update = Matrix(3, 5, 0.0);
    p.b_forget.fill(20.0);   // f -> 1
    p.b_update.fill(-20.0);  // u -> 0
    Rng rng(82);
    CellState st = random_state(3, rng);
    auto [next, trace] = step(p, cfg, st, random_input(2, rng));
    for (std::size_t i = 0; i < 3; ++i)
        CHECK(next.s[i] == doctest::Approx(st.s[i]).epsilon(1e-6));
}

TEST_CASE("exp gating weight stays in (0,1) even for extreme inputs") {
    CellConfig cfg = small_config(2, 3);
    cfg.update_variant = UpdateVariant::exp_gating;
    CellParams p = random_params(cfg, 91);
    p.b_expgate[0] = 500.0;  // would overflow a raw exp
    p.b_expgate[1] = -500.0;
    Rng rng(92);
    CellState st = random_state(3, rng);
    auto [next, trace] = step(p, cfg, st, random_input(2, rng));
    for (double w : trace.mix_w.data) {
        CHECK(w > 0.0);
        CHECK(w < 1.0);
    }
    CHECK(all_finite(next.s));
}

TEST_CASE("all variants agree with the scalar reference") {
    Rng meta(777);
    for (UpdateVariant v : {UpdateVariant::self_selective, UpdateVariant::traditional_gating,
                            UpdateVariant::quasi_linear, UpdateVariant::exp_gating}) {
        for (int iter = 0; iter < 20; ++iter) {
            CellConfig cfg = small_config(1 + meta.below(5), 1 + meta.below(5));
            cfg.update_variant = v;
            CellParams p = random_params(cfg, meta.next_u64());
            Rng rng(meta.next_u64());
            CellState st = random_state(cfg.hidden_dim, rng);
            const Vector x = random_input(cfg.input_dim, rng);
            auto [next, trace] = step(p, cfg, st, x);
            scalar_ref::State ref_prev{st.t.data, st.c.data, st.s.data};
            const scalar_ref::State ref = scalar_ref::step(p, cfg, ref_prev, x.data);
            for (std::size_t i = 0; i < cfg.hidden_dim; ++i) {
                CHECK(std::abs(next.t[i] - ref.t[i]) < 1e-12);
                CHECK(std::abs(next.c[i] - ref.c[i]) < 1e-12);
                CHECK(std::abs(next.s[i] - ref.s[i]) < 1e-12);
            }
        }
    }
}

TEST_CASE("step reports the failing stage on non-finite values") {
    CellConfig cfg = small_config(2, 3);
    CellParams p(cfg);
    p.w_zt(0, 0) = std::numeric_limits<double>::quiet_NaN();
    CellState st(3);
    CHECK_THROWS_WITH_AS(step(p, cfg, st, Vector{1.0, 0.0}),
                         doctest::Contains("compute_gates"), NumericError);
}

TEST_CASE("step rejects shape mismatches") {
    CellConfig cfg = small_config(2, 3);
    CellParams p(cfg);
    CellState st(3);
    CHECK_THROWS_AS(step(p, cfg, st, Vector{1.0}), std::invalid_argument);
    CellState bad(2);
    CHECK_THROWS_AS(step(p, cfg, bad, Vector{1.0, 2.0}), std::invalid_argument);
}

TEST_CASE("param_count formula matches hand cases") {
    CHECK(param_count(small_config(1, 1)) == 16);
    CHECK(param_count(small_config(2, 3)) == 90);
}

TEST_CASE("param_count equals the number of allocated scalars") {
    Rng rng(1234);
    for (int iter = 0; iter < 20; ++iter) {
        CellConfig cfg = small_config(1 + rng.below(16), 1 + rng.below(16));
        const int pick = static_cast<int>(rng.below(4));
        cfg.update_variant = static_cast<UpdateVariant>(pick);
        CellParams p(cfg);
        std::size_t allocated = 0;
        visit_blocks(p, [&](const char*, std::vector<double>& block) { allocated += block.size(); });
        CHECK(param_count(cfg) == allocated);
    }
}

TEST_CASE("flop count is exactly linear in nothing but itself") {
    // per-step count is sequence-independent by construction; variants only add
    const CellConfig base = small_config(3, 8);
    CellConfig traditional = base;
    traditional.update_variant = UpdateVariant::traditional_gating;
    CHECK(flop_count_per_step(traditional) > flop_count_per_step(base));
}
