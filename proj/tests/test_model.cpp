#include "pomdp/filter.hpp"
#include "pomdp/model.hpp"

#include <doctest.h>

#include <filesystem>

using namespace pomdp;

namespace {

bool bit_identical(const FinitePOMDP& a, const FinitePOMDP& b) {
    if (a.n_states != b.n_states || a.n_obs != b.n_obs || a.n_actions != b.n_actions) return false;
    for (int u = 0; u < a.n_actions; ++u)
        if (a.transition[u] != b.transition[u]) return false;
    return a.observation == b.observation && a.cost == b.cost && a.discount == b.discount && a.prior == b.prior &&
           a.state_metric == b.state_metric && a.c_max == b.c_max;
}

bool names_field(const ModelValidationError& e, const std::string& field, const std::string& what) {
    for (const Violation& v : e.report().violations)
        if (v.field == field && v.description.find(what) != std::string::npos) return true;
    return false;
}

}  // namespace

TEST_CASE("shipped m1.json loads with the reference dimensions and kernels") {
    FinitePOMDP m = load_model(std::string(POMDP_MODELS_DIR) + "/m1.json");
    CHECK(m.n_states == 2);
    CHECK(m.n_obs == 2);
    CHECK(m.n_actions == 2);
    CHECK(bit_identical(m, make_m1()));
}

TEST_CASE("save then load reproduces every numeric field bit for bit") {
    auto dir = std::filesystem::temp_directory_path() / "pomdp_model_roundtrip";
    std::filesystem::create_directories(dir);
    std::vector<FinitePOMDP> models = {make_m1(), make_mixing_example(0.05, {3, 2, 2}, 11),
                                       make_mixing_example(0.1, {4, 3, 1}, 12)};
    for (std::size_t i = 0; i < models.size(); ++i) {
        std::string path = (dir / ("m" + std::to_string(i) + ".json")).string();
        save_model(models[i], path);
        CHECK(bit_identical(load_model(path), models[i]));
        CHECK(bit_identical(parse_model(serialize_model(models[i])), models[i]));
    }
}

TEST_CASE("a transition row summing to 0.9 is rejected and named") {
    FinitePOMDP m = make_m1();
    m.transition[1](0, 1) = 0.4;
    try {
        parse_model(serialize_model(m));
        FAIL("expected a validation failure");
    } catch (const ModelValidationError& e) {
        CHECK(names_field(e, "transition[1][0]", "sum"));
        CHECK_FALSE(e.report().ok());
    }
}

TEST_CASE("a negative cost entry is rejected as cost negative") {
    FinitePOMDP m = make_m1();
    m.cost(1, 0) = -0.5;
    try {
        parse_model(serialize_model(m));
        FAIL("expected a validation failure");
    } catch (const ModelValidationError& e) {
        CHECK(names_field(e, "cost[1][0]", "cost negative"));
    }
}

TEST_CASE("rows within 1e-9 of stochastic are renormalized; farther rows are not") {
    FinitePOMDP m = make_m1();
    m.transition[0](0, 0) += 5e-10;
    FinitePOMDP loaded = parse_model(serialize_model(m));
    CHECK(std::abs(loaded.transition[0].row(0).sum() - 1.0) <= 1e-15);
    m.transition[0](0, 0) += 1e-8;
    CHECK_THROWS_AS(parse_model(serialize_model(m)), ModelValidationError);
}

TEST_CASE("malformed documents and dimension mismatches are parse errors") {
    CHECK_THROWS_AS(parse_model("{ not json"), std::invalid_argument);
    CHECK_THROWS_AS(parse_model(R"({"n_states": 2})"), std::invalid_argument);
    std::string text = serialize_model(make_m1());
    auto pos = text.find("\"n_obs\": 2");
    REQUIRE(pos != std::string::npos);
    text.replace(pos, 10, "\"n_obs\": 3");
    CHECK_THROWS_AS(parse_model(text), std::invalid_argument);
}

TEST_CASE("validation report lists metric and discount violations") {
    FinitePOMDP m = make_m1();
    m.state_metric(0, 1) = 2.0;
    m.discount = 1.0;
    ValidationReport r = validate(m);
    CHECK_FALSE(r.ok());
    bool symmetric = false, discount = false;
    for (const Violation& v : r.violations) {
        symmetric |= v.description == "not symmetric";
        discount |= v.field == "discount";
    }
    CHECK(symmetric);
    CHECK(discount);
    CHECK(validate(make_m1()).ok());
}

TEST_CASE("make_fully_observed installs the identity channel") {
    Matrix t(2, 2);
    t << 0.7, 0.3, 0.3, 0.7;
    Matrix c(2, 1);
    c << 0, 1;
    FinitePOMDP m = make_fully_observed({t}, c, 0.9, Vector::Constant(2, 0.5));
    CHECK(m.n_obs == 2);
    CHECK(m.observation == Matrix::Identity(2, 2));

    FinitePOMDP one = make_fully_observed({Matrix::Ones(1, 1)}, Matrix::Constant(1, 1, 1.0), 0.5, Vector::Ones(1));
    CHECK(one.observation == Matrix::Ones(1, 1));

    FinitePOMDP m1 = make_m1();
    FinitePOMDP fo = make_fully_observed(m1.transition, m1.cost, m1.discount, m1.prior);
    for (int u = 0; u < 2; ++u)
        for (int y = 0; y < 2; ++y) {
            Belief b = filter_update(fo, Vector::Constant(2, 0.5), u, y);
            CHECK(b[y] == 1.0);
            CHECK(b.sum() == 1.0);
        }
}

TEST_CASE("fully observed filter update is the point mass at the observation for full-support beliefs") {
    FinitePOMDP m = with_observation(make_mixing_example(0.05, {3, 3, 2}, 5), Matrix::Identity(3, 3));
    Rng rng(3, 0);
    for (int i = 0; i < 200; ++i) {
        Belief b = rng.dirichlet(3);
        int u = rng.below(2), y = rng.below(3);
        Belief next = filter_update(m, b, u, y);
        CHECK(next[y] == doctest::Approx(1.0).epsilon(1e-15));
        CHECK(next.sum() == doctest::Approx(1.0).epsilon(1e-15));
    }
}

TEST_CASE("mixing examples respect eps, validate, and are deterministic in the seed") {
    for (std::uint64_t seed = 0; seed < 20; ++seed) {
        FinitePOMDP m = make_mixing_example(0.1, {3, 2, 2}, seed);
        CHECK(validate(m).ok());
        int count = 0;
        for (const Matrix& t : m.transition) {
            CHECK(t.minCoeff() >= 0.1 - 1e-15);
            count += static_cast<int>(t.size());
        }
        CHECK(count == 18);
        CHECK(m.observation.minCoeff() >= 0.1 - 1e-15);
        CHECK(bit_identical(m, make_mixing_example(0.1, {3, 2, 2}, seed)));
    }
    CHECK_FALSE(bit_identical(make_mixing_example(0.1, {3, 2, 2}, 1), make_mixing_example(0.1, {3, 2, 2}, 2)));
}

TEST_CASE("eps = 1/n gives uniform kernels with zero Birkhoff coefficient") {
    FinitePOMDP m = make_mixing_example(0.5, {2, 2, 2}, 9);
    for (const Matrix& t : m.transition) CHECK((t.array() - 0.5).abs().maxCoeff() <= 1e-15);
    CHECK(stability_constants(m).birkhoff_tau == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("eps above 1/n is rejected") {
    CHECK_THROWS_AS(make_mixing_example(0.6, {2, 2, 2}, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_mixing_example(0.0, {2, 2, 2}, 1), std::invalid_argument);
    CHECK_THROWS_AS(make_mixing_example(0.4, {3, 2, 2}, 1), std::invalid_argument);
}

TEST_CASE("control-free detection") {
    CHECK_FALSE(is_control_free(make_m1()));
    CHECK(is_control_free(make_mixing_example(0.1, {3, 2, 1}, 4)));
}
