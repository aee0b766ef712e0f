#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "seq2cause/info.hpp"
#include "seq2cause/scm.hpp"
#include "oracles.hpp"

#include <cmath>
#include <map>
#include <memory>

using namespace s2c;

TEST_CASE("binary kl: frozen values") {
    CHECK(binary_kl(0.5, 0.5) == 0.0);
    // 0.75 ln 1.5 + 0.25 ln 0.5
    CHECK(binary_kl(0.75, 0.5) == doctest::Approx(0.130812).epsilon(1e-5));
    CHECK(binary_kl(0.75, 0.5) > 0.0);
    // clamping caps the divergence near ln((1-eps)/eps) ~ 13.8155
    CHECK(binary_kl(1.0, 0.0) == doctest::Approx(13.8155).epsilon(1e-3));
    CHECK(binary_kl(0.0, 1.0) == doctest::Approx(13.8155).epsilon(1e-3));
    CHECK(std::isfinite(binary_kl(1.0, 0.0)));
    // asymmetric in general (complementary pairs are the symmetric special
    // case, so probe a non-complementary one)
    CHECK(binary_kl(0.9, 0.2) != binary_kl(0.2, 0.9));
}

TEST_CASE("categorical kl") {
    Dist u4 = {0.25, 0.25, 0.25, 0.25};
    Dist onehot = {1.0, 0.0, 0.0, 0.0};
    // kl(p || uniform_n) = ln n - H(p)
    CHECK(categorical_kl(onehot, u4) == doctest::Approx(std::log(4.0)).epsilon(1e-9));
    CHECK(categorical_kl(u4, u4) == doctest::Approx(0.0));
    // q gets floored, so mass where q = 0 stays finite
    CHECK(std::isfinite(categorical_kl(u4, onehot)));
    CHECK(categorical_kl(u4, onehot) > 0.0);
    // 0 ln 0 = 0 on the p side
    Dist p = {0.5, 0.5, 0.0, 0.0};
    CHECK(std::isfinite(categorical_kl(p, u4)));
    CHECK(categorical_kl(p, u4) == doctest::Approx(std::log(4.0) - std::log(2.0)).epsilon(1e-9));
}

TEST_CASE("entropy") {
    Dist u = {0.25, 0.25, 0.25, 0.25};
    CHECK(entropy(u) == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    Dist onehot = {0.0, 1.0, 0.0};
    CHECK(entropy(onehot) == doctest::Approx(0.0));
    Dist bern = {0.9, 0.1};
    CHECK(entropy(bern) == doctest::Approx(0.325083).epsilon(1e-5));
    for (auto& d : {u, bern}) CHECK(entropy(d) <= std::log(double(d.size())) + 1e-12);
}

TEST_CASE("topk_p sampling: truncation semantics") {
    // top_k = 1 is greedy
    Dist d = {0.2, 0.5, 0.3};
    SamplingConfig greedy;
    greedy.top_k = 1;
    greedy.top_p = 1.0;
    Rng rng(stream_key(1));
    for (int i = 0; i < 10; ++i) CHECK(topk_p_sample(d, greedy, rng) == 1);

    // ties break toward the lower event id
    Dist tie = {0.4, 0.4, 0.2};
    for (int i = 0; i < 10; ++i) CHECK(topk_p_sample(tie, greedy, rng) == 0);

    // nucleus keeps the minimal prefix whose raw mass exceeds top_p:
    // sorted {0.5, 0.3, 0.15, 0.05}, top_k=3 keeps the first three, cumsum
    // crosses 0.7 at the second element, so support is {0, 1} renormalized
    // to {0.625, 0.375}
    Dist n = {0.5, 0.3, 0.15, 0.05};
    SamplingConfig cfg;
    cfg.top_k = 3;
    cfg.top_p = 0.7;
    std::map<TokenId, int> counts;
    const int trials = 40000;
    Rng rng2(stream_key(2));
    for (int i = 0; i < trials; ++i) counts[topk_p_sample(n, cfg, rng2)]++;
    CHECK(counts.size() == 2);
    CHECK(counts[0] / double(trials) == doctest::Approx(0.625).epsilon(0.02));
    CHECK(counts[1] / double(trials) == doctest::Approx(0.375).epsilon(0.05));

    // the top element always survives even when it alone exceeds top_p
    Dist peak = {0.9, 0.1};
    SamplingConfig tiny;
    tiny.top_k = 2;
    tiny.top_p = 0.1;
    Rng rng3(stream_key(3));
    for (int i = 0; i < 10; ++i) CHECK(topk_p_sample(peak, tiny, rng3) == 0);

    // disabled truncation samples the full distribution
    SamplingConfig open;
    open.top_k = 0;
    open.top_p = 1.0;
    std::map<TokenId, int> full;
    Rng rng4(stream_key(4));
    for (int i = 0; i < trials; ++i) full[topk_p_sample(n, open, rng4)]++;
    CHECK(full.size() == 4);
    CHECK(full[3] / double(trials) == doctest::Approx(0.05).epsilon(0.2));

    // temperature -> 0 approaches greedy
    SamplingConfig cold = open;
    cold.temperature = 0.05;
    Rng rng5(stream_key(5));
    for (int i = 0; i < 10; ++i) CHECK(topk_p_sample(n, cold, rng5) == 0);
}

TEST_CASE("context particles pin the frame and resample the middle") {
    ScmSpec s = generate_scm(6, 2, 0.4, 2.0, 0.9, 31);
    ExactOracle oracle(s);
    EventSequence seq;
    seq.tokens = {6, 2, 4, 1, 3, 5, 0};
    SamplingConfig cfg;
    cfg.n = 32;
    cfg.top_k = 0;
    cfg.top_p = 1.0;
    cfg.seed = 11;
    const int c = 4;
    auto parts = sample_context_particles(seq, oracle, c, cfg);
    REQUIRE(parts.size() == 32);
    bool any_resampled = false;
    for (const auto& p : parts) {
        REQUIRE(p.size() == seq.tokens.size());
        CHECK(p[0] == 6);                      // cls pinned
        for (size_t i = c; i < p.size(); ++i)  // suffix observed
            CHECK(p[i] == seq.tokens[i]);
        for (size_t i = 1; i < c; ++i) {
            CHECK(p[i] >= 0);
            CHECK(p[i] < 6);
            if (p[i] != seq.tokens[i]) any_resampled = true;
        }
    }
    CHECK(any_resampled);

    // deterministic in the seed
    auto parts2 = sample_context_particles(seq, oracle, c, cfg);
    CHECK(parts == parts2);
    cfg.seed = 12;
    CHECK(sample_context_particles(seq, oracle, c, cfg) != parts);

    // a deterministic estimator yields its greedy prefix in every particle
    ScmSpec det = s;
    for (auto& b : det.bias) b = 0.0;
    det.rows.assign(det.memory, std::vector<std::vector<std::pair<TokenId, double>>>(det.vocab));
    det.bias[3] = 40.0;  // token 3 is near-certain everywhere
    ExactOracle det_oracle(det);
    SamplingConfig g;
    g.n = 4;
    g.top_k = 1;
    g.seed = 5;
    auto det_parts = sample_context_particles(seq, det_oracle, c, g);
    for (const auto& p : det_parts)
        for (size_t i = 1; i < c; ++i) CHECK(p[i] == 3);
}

TEST_CASE("cmi estimate basics") {
    std::vector<double> same = {0.3, 0.5, 0.7};
    CHECK(cmi_estimate(same, same) == 0.0);
    std::vector<double> w = {0.75};
    std::vector<double> wo = {0.5};
    CHECK(cmi_estimate(w, wo) == doctest::Approx(0.130812).epsilon(1e-5));
    // mean over particles
    std::vector<double> w2 = {0.75, 0.5};
    std::vector<double> wo2 = {0.5, 0.5};
    CHECK(cmi_estimate(w2, wo2) == doctest::Approx(0.130812 / 2).epsilon(1e-5));
    CHECK(cmi_estimate(w2, wo2) >= 0.0);
}

TEST_CASE("ace: frozen values") {
    std::vector<double> w = {0.9, 0.1};
    std::vector<double> wo = {0.4, 0.6};
    AceResult r = ace(w, wo);
    // diffs are +0.5 and -0.5: mean 0, population std 0.5
    CHECK(r.mean == doctest::Approx(0.0));
    CHECK(r.std == doctest::Approx(0.5));

    std::vector<double> all = {1.0};
    std::vector<double> none = {0.0};
    AceResult hi = ace(all, none);
    CHECK(hi.mean == doctest::Approx(1.0));
    AceResult lo = ace(none, all);
    CHECK(lo.mean == doctest::Approx(-1.0));
}

TEST_CASE("pmi") {
    // joint 0.5, marginals 0.5: pmi -> ln 2 as delta -> 0
    CHECK(pmi(0.5, 0.5, 0.5, 1e-9) == doctest::Approx(std::log(2.0)).epsilon(1e-6));
    // independence -> 0
    CHECK(pmi(0.25, 0.5, 0.5, 1e-9) == doctest::Approx(0.0).epsilon(1e-6));
    // zero joint with nonzero marginals: large negative but finite
    CHECK(std::isfinite(pmi(0.0, 0.3, 0.5, 0.005)));
    CHECK(pmi(0.0, 0.3, 0.5, 0.005) < -1.0);
}

TEST_CASE("dynamic threshold: frozen example") {
    CmiSeries s;
    s.context = 0;
    s.n_rows = 4;
    s.n_targets = 1;
    s.values = {0.0, 0.0, 0.0, 1.0};
    ThresholdResult r = dynamic_threshold(s, 1.0);
    // mean 0.25, population std sqrt(3)/4: tau = 0.683013
    CHECK(r.tau[0] == doctest::Approx(0.683013).epsilon(1e-5));
    CHECK(r.mask == std::vector<uint8_t>{0, 0, 0, 1});
    CHECK(r.degenerate[0] == 0);

    // non-strict comparison: a constant series is fully degenerate and all-kept
    CmiSeries flat;
    flat.n_rows = 3;
    flat.n_targets = 1;
    flat.values = {0.2, 0.2, 0.2};
    ThresholdResult rf = dynamic_threshold(flat, 2.75);
    CHECK(rf.tau[0] == doctest::Approx(0.2));
    CHECK(rf.mask == std::vector<uint8_t>{1, 1, 1});
    CHECK(rf.degenerate[0] == 1);

    // at least two rows required
    CmiSeries one;
    one.n_rows = 1;
    one.n_targets = 1;
    one.values = {0.5};
    CHECK_THROWS_AS(dynamic_threshold(one, 2.75), config_error);

    // per-target isolation: a huge column must not move another's tau
    CmiSeries two;
    two.n_rows = 4;
    two.n_targets = 2;
    two.values = {0, 100, 0, 100, 0, 100, 1, 100};
    ThresholdResult rt = dynamic_threshold(two, 1.0);
    CHECK(rt.tau[0] == doctest::Approx(0.683013).epsilon(1e-5));
    CHECK(rt.tau[1] == doctest::Approx(100.0));
}

TEST_CASE("monte-carlo cmi matches exhaustive enumeration on a small system") {
    // tiny SCM, one label, exact label posteriors on both paths; the only
    // monte-carlo element is the prefix particle set
    ScmSpec s = generate_scm(3, 1, 0.6, 1.5, 0.9, 41);
    LabelPlan plan;
    plan.n_labels = 2;
    plan.rules.push_back(BooleanRule::parse("x1"));
    plan.rules.push_back(BooleanRule::parse("x0 & x2"));

    EventSequence seq;
    seq.tokens = {3, 1, 0, 2, 1, 0};  // L = 5
    const int c = 3;
    const int L = seq.length();

    auto cells = testing::exact_mb_cells(s, plan, seq, c);

    ExactOracle oracle(s);
    testing::ExhaustivePosterior post(s, plan, L);
    SamplingConfig cfg;
    cfg.n = 65536;  // keeps monte-carlo error a few x below the 1e-2 check
    cfg.top_k = 0;
    cfg.top_p = 1.0;
    cfg.seed = 7;
    auto parts = sample_context_particles(seq, oracle, c, cfg);

    for (int i = c; i < L; ++i) {
        std::vector<std::vector<double>> pw(plan.n_labels), pwo(plan.n_labels);
        for (const auto& part : parts) {
            auto with = post.label_posterior(std::span<const TokenId>(part.data(), size_t(i) + 2));
            auto without =
                post.label_posterior(std::span<const TokenId>(part.data(), size_t(i) + 1));
            for (int j = 0; j < plan.n_labels; ++j) {
                pw[j].push_back(with[j]);
                pwo[j].push_back(without[j]);
            }
        }
        for (int j = 0; j < plan.n_labels; ++j) {
            double est = cmi_estimate(pw[j], pwo[j]);
            CHECK(std::abs(est - cells[i - c][j].cmi) < 1e-2);
            AceResult a = ace(pw[j], pwo[j]);
            CHECK(std::abs(a.mean - cells[i - c][j].ace_mean) < 1e-2);
        }
    }
}
