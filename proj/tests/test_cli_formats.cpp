#include <catch2/catch_amalgamated.hpp>

#include "smlsbm/config.hpp"
#include "smlsbm/experiments.hpp"

using namespace smlsbm;

TEST_CASE("config parser handles sections, comments and whitespace") {
    auto cfg = parse_config_text(
        "# header comment\n"
        "[experiment]\n"
        "name = fig3   # trailing comment\n"
        "replicates=7\n"
        "\n"
        "[stratum.1]\n"
        "  p_in = 0.6\n");
    CHECK(config_str(cfg, "experiment.name", "") == "fig3");
    CHECK(config_u64(cfg, "experiment.replicates", 0) == 7);
    CHECK(config_double(cfg, "stratum.1.p_in", 0.0) == 0.6);
    CHECK(config_str(cfg, "missing.key", "fallback") == "fallback");
}

TEST_CASE("config parser rejects malformed lines") {
    CHECK_THROWS_AS(parse_config_text("[unterminated\n"), ParseError);
    CHECK_THROWS_AS(parse_config_text("no equals sign\n"), ParseError);
    CHECK_THROWS_AS(parse_config_text("= value\n"), ParseError);
    CHECK_THROWS_WITH(parse_config_text("a = 1\nbroken line\n"),
                      Catch::Matchers::ContainsSubstring("line 2"));
}

TEST_CASE("config numeric accessors validate values") {
    auto cfg = parse_config_text("[a]\nx = nope\ny = 1.5\n");
    CHECK_THROWS_AS(config_double(cfg, "a.x", 0.0), ParseError);
    CHECK_THROWS_AS(config_u64(cfg, "a.y", 0), ParseError);
    CHECK(config_double(cfg, "a.y", 0.0) == 1.5);
}

TEST_CASE("config grid parsing") {
    auto cfg = parse_config_text("[e]\ngrid = 2, 4,6 ,8\n");
    CHECK(config_grid(cfg, "e.grid") == std::vector<double>{2, 4, 6, 8});
    CHECK(config_grid(cfg, "e.missing").empty());
    auto bad = parse_config_text("[e]\ngrid = 2,x\n");
    CHECK_THROWS_AS(config_grid(bad, "e.grid"), ParseError);
}

TEST_CASE("config hash is stable and order-independent") {
    auto a = parse_config_text("[s]\na = 1\nb = 2\n");
    auto b = parse_config_text("[s]\nb = 2\na = 1\n");
    CHECK(config_hash(a) == config_hash(b));
    CHECK(config_hash(a).size() == 16);
    auto c = parse_config_text("[s]\na = 1\nb = 3\n");
    CHECK(config_hash(a) != config_hash(c));
}

TEST_CASE("presets carry the published defaults") {
    auto fig3 = config_preset("fig3");
    CHECK(config_u64(fig3, "generator.n", 0) == 128);
    CHECK(config_u64(fig3, "generator.k", 0) == 4);
    CHECK(config_double(fig3, "generator.c", 0.0) == 20.0);
    CHECK(config_u64(fig3, "generator.n_strata", 0) == 3);
    CHECK(config_double(fig3, "stratum.1.p_in", 0.0) == 0.6);
    CHECK(config_double(fig3, "stratum.3.p_in", 0.0) == 0.125);

    auto l10 = config_preset("fig4-L10");
    CHECK(config_double(l10, "generator.c", 0.0) == 16.0);
    CHECK(config_u64(l10, "experiment.layers", 0) == 10);
    CHECK(config_grid(l10, "experiment.grid") ==
          std::vector<double>{2, 4, 6, 8, 10, 12, 14, 16, 18});
    auto l100 = config_preset("fig4-L100");
    CHECK(config_u64(l100, "experiment.layers", 0) == 100);

    auto mb = config_preset("microbiome");
    CHECK(config_double(mb, "microbiome.threshold", 0.0) == 0.2);
    CHECK(config_u64(mb, "microbiome.min_layers", 0) == 2);
    CHECK(config_u64(mb, "microbiome.s", 0) == 6);

    CHECK_THROWS_AS(config_preset("nope"), ValidationError);
}

TEST_CASE("spec_from_config builds the fig3 generator") {
    auto spec = spec_from_config(config_preset("fig3"), 11);
    REQUIRE(spec.strata.size() == 3);
    CHECK(spec.n_layers() == 30);
    CHECK(spec.strata[0].params.p_in == 0.6);
    CHECK(spec.strata[0].params.p_out == Catch::Approx(derive_p_out(20, 128, 4, 0.6)));
    for (const auto& st : spec.strata)
        CHECK(mean_degree(st.params) == Catch::Approx(20.0));
}

TEST_CASE("spec_from_config resolves detectability gaps and shared assignments") {
    auto spec = spec_from_config(config_preset("fig4-L10"), 3);
    REQUIRE(spec.strata.size() == 2);
    CHECK(spec.strata[0].params.p_in == Catch::Approx(0.18359375));
    CHECK(spec.strata[0].params.p_out == Catch::Approx(0.10546875));
    CHECK(detectability_gap(spec.strata[1].params) == Catch::Approx(4.0));
    REQUIRE(spec.strata[1].share_z_with.has_value());
    CHECK(*spec.strata[1].share_z_with == 0);
}

TEST_CASE("spec_from_config rejects incomplete strata") {
    CHECK_THROWS_AS(spec_from_config(parse_config_text("[generator]\nn = 8\nk = 2\n"), 0),
                    ValidationError);
    CHECK_THROWS_AS(
        spec_from_config(
            parse_config_text("[generator]\nn = 8\nk = 2\nn_strata = 1\n"
                              "[stratum.1]\nn_layers = 1\n"),
            0),
        ValidationError);
    CHECK_THROWS_AS(
        spec_from_config(
            parse_config_text("[generator]\nn = 8\nk = 2\nn_strata = 1\n"
                              "[stratum.1]\np_in = 0.5\nn_layers = 1\n"),
            0),
        ValidationError);
}

TEST_CASE("csv header is versioned and carries config id and seed") {
    const auto header = csv_header("deadbeef", 42);
    CHECK(header.find("# smlsbm-results v1\n") == 0);
    CHECK(header.find("config=deadbeef") != std::string::npos);
    CHECK(header.find("seed=42") != std::string::npos);
    CHECK(header.find("experiment,grid,replicate,metric,value,status") != std::string::npos);
}

TEST_CASE("csv rows use full-precision values") {
    std::vector<CsvRow> rows{{"fig4", "10", 3, "strata_nmi", 1.0 / 3.0, "ok"}};
    const auto text = csv_rows(rows);
    CHECK(text == "fig4,10,3,strata_nmi,0.33333333333333331,ok\n");
}

TEST_CASE("aggregate computes mean and standard error") {
    auto a = aggregate({1.0, 2.0, 3.0, 4.0});
    CHECK(a.mean == Catch::Approx(2.5));
    // sample sd sqrt(5/3), stderr sd/2
    CHECK(a.stderr_ == Catch::Approx(std::sqrt(5.0 / 3.0) / 2.0));
    CHECK(aggregate({}).mean == 0.0);
    CHECK(aggregate({7.0}).stderr_ == 0.0);
}

TEST_CASE("config round trip through text form") {
    auto cfg = config_preset("fig3");
    auto back = parse_config_text(config_to_text(cfg));
    CHECK(back == cfg);
    CHECK(config_hash(back) == config_hash(cfg));
}
