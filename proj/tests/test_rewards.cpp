#include "doctest.h"

#include <recite/rewards.hpp>

#include <random>
#include <string>
#include <vector>

#include "support/fixtures.hpp"
#include "support/gen.hpp"

using namespace recite;

TEST_CASE("normalize_text is SQuAD-style and idempotent") {
    const auto squad = TextNormalizationPolicy::squad();
    CHECK(normalize_text("The Cat, sat.", squad) == "cat sat");
    CHECK(normalize_text("7,413,070", squad) == "7413070");
    CHECK(normalize_text("  spaced   out  ", squad) == "spaced out");
    std::mt19937_64 rng(3);
    for (int i = 0; i < 200; ++i) {
        const std::string s = gen::random_sentence(rng, 1, 12);
        const std::string once = normalize_text(s, squad);
        CHECK(normalize_text(once, squad) == once);
    }
}

TEST_CASE("token_f1 examples") {
    CHECK(token_f1("Talk That Talk", "Talk That Talk") == doctest::Approx(1.0));
    CHECK(token_f1("alpha beta", "gamma delta") == doctest::Approx(0.0));
    // with articles kept: bags {the,cat,sat} vs {cat,sat,down}, overlap 2,
    // P = R = 2/3, F1 = 2/3
    TextNormalizationPolicy keep_articles;
    keep_articles.drop_articles = false;
    CHECK(token_f1("the cat sat", "cat sat down", keep_articles) == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("token_f1 counts token multiplicity") {
    // bags {x,x} vs {x}: overlap 1, P = 1/2, R = 1 -> F1 = 2/3
    CHECK(token_f1("x x", "x") == doctest::Approx(2.0 / 3.0));
}

TEST_CASE("token_f1 symmetry and self-identity") {
    std::mt19937_64 rng(11);
    const auto squad = TextNormalizationPolicy::squad();
    for (int i = 0; i < 1000; ++i) {
        const std::string a = gen::random_sentence(rng, 1, 10);
        const std::string b = gen::random_sentence(rng, 1, 10);
        CHECK(token_f1(a, b, squad) == doctest::Approx(token_f1(b, a, squad)));
        CHECK(token_f1(a, a, squad) == doctest::Approx(1.0));
    }
}

TEST_CASE("accuracy_reward") {
    CHECK(accuracy_reward(fixtures::chart_response, fixtures::chart_gold_answer) ==
          doctest::Approx(1.0));
    // "7413070" shares no normalized token with "7.2 million"
    CHECK(accuracy_reward(fixtures::population_response, fixtures::population_gold_answer) ==
          doctest::Approx(0.0));
    CHECK(accuracy_reward("<think>x</think>no prefix", "gold") == doctest::Approx(0.0));
}

TEST_CASE("format_reward") {
    CHECK(format_reward(fixtures::chart_response) == 1.0);
    CHECK(format_reward(fixtures::population_response) == 1.0);
    CHECK(format_reward("no think at all Answer: x") == 0.0);
    CHECK(format_reward("<retrieval>a</retrieval><think>b</think>Answer: c") == 0.0);
}

TEST_CASE("retrieval_reward") {
    const std::string context =
        "The river bends north of the harbor.\nGranite cliffs shade the village market "
        "every summer morning.";

    SUBCASE("spans sliced from context score 1") {
        const std::string resp =
            "<think>note <retrieval>river bends north</retrieval> and "
            "<retrieval>Granite cliffs shade the village</retrieval></think>Answer: x";
        CHECK(retrieval_reward(resp, context) == 1.0);
    }
    SUBCASE("zero retrieval pairs score 0") {
        CHECK(retrieval_reward("<think>no spans</think>Answer: x", context) == 0.0);
    }
    SUBCASE("one fabricated span spoils the reward") {
        const std::string resp =
            "<think><retrieval>river bends north</retrieval>"
            "<retrieval>made up facts</retrieval></think>Answer: x";
        CHECK(retrieval_reward(resp, context) == 0.0);
    }
    SUBCASE("line-wrapped span still counts via whitespace collapse") {
        const std::string resp =
            "<think><retrieval>harbor.\nGranite   cliffs</retrieval></think>Answer: x";
        CHECK(retrieval_reward(resp, context) == 1.0);
    }
    SUBCASE("duplicating a valid span changes nothing") {
        const std::string resp =
            "<think><retrieval>river bends</retrieval><retrieval>river "
            "bends</retrieval></think>Answer: x";
        CHECK(retrieval_reward(resp, context) == 1.0);
    }
}

TEST_CASE("total_reward combines components with the default weights") {
    const std::string context = "alpha beta gamma delta";
    const std::string perfect =
        "<think>quote <retrieval>beta gamma</retrieval></think>Answer: epsilon";
    auto b = total_reward(perfect, "epsilon", context);
    CHECK(b.r_acc == doctest::Approx(1.0));
    CHECK(b.r_fmt == 1.0);
    CHECK(b.r_ret == 1.0);
    CHECK(b.r_total == doctest::Approx(1.0));

    // wrong answer, good structure: 0.7*0 + 0.1*1 + 0.2*1 = 0.3
    auto wrong = total_reward(perfect, "zeta", context);
    CHECK(wrong.r_acc == doctest::Approx(0.0));
    CHECK(wrong.r_total == doctest::Approx(0.3));

    auto empty = total_reward("", "zeta", context);
    CHECK(empty.r_acc == 0.0);
    CHECK(empty.r_fmt == 0.0);
    CHECK(empty.r_ret == 0.0);
    CHECK(empty.r_total == 0.0);
}

TEST_CASE("total_reward is monotone in each component") {
    // components enter through a non-negative weighted sum; verify on the
    // boundary grid
    const RewardWeights w;
    for (double acc : {0.0, 0.5, 1.0}) {
        for (double fmt : {0.0, 1.0}) {
            for (double ret : {0.0, 1.0}) {
                const double base = w.lambda_acc * acc + w.lambda_fmt * fmt + w.lambda_ret * ret;
                CHECK(w.lambda_acc * (acc + 0.1) + w.lambda_fmt * fmt + w.lambda_ret * ret >=
                      base);
                CHECK(base >= 0.0);
                CHECK(base <= 1.0);
            }
        }
    }
}
