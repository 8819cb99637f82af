#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "ifmlab/models.hpp"

using namespace ifm;

namespace {

Tensor<float> random_batch(int64_t b, int64_t hw, uint64_t seed) {
    Tensor<float> x(b, 1, hw, hw);
    Rng rng(seed);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform());
    return x;
}

}  // namespace

TEST_CASE("classifier tap shapes follow the layer chain") {
    Classifier<float> clf;
    clf.init(ClassifierConfig{}, 42);
    auto out = clf.forward(random_batch(16, 32, 1), Mode::Train);
    CHECK(out.logits.dims[0] == 16);
    CHECK(out.logits.dims[1] == 10);
    const std::array<std::array<int64_t, 4>, 4> want = {{{16, 32, 16, 16},
                                                         {16, 64, 8, 8},
                                                         {16, 128, 4, 4},
                                                         {16, 128, 2, 2}}};
    for (int l = 0; l < 4; ++l) {
        CHECK(out.taps[l].dims[0] == want[l][0]);
        CHECK(out.taps[l].dims[1] == want[l][1]);
        CHECK(out.taps[l].dims[2] == want[l][2]);
        CHECK(out.taps[l].dims[3] == want[l][3]);
    }
    CHECK(clf.cfg.head_width() == 512);
}

TEST_CASE("init is deterministic and fan-in shaped") {
    Classifier<float> a, b;
    a.init(ClassifierConfig{}, 7);
    b.init(ClassifierConfig{}, 7);
    auto pa = a.params(), pb = b.params();
    REQUIRE(pa.size() == pb.size());
    for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i].value->data == pb[i].value->data);

    Classifier<float> c;
    c.init(ClassifierConfig{}, 8);
    CHECK(c.params()[0].value->data != pa[0].value->data);

    // conv1 weight shape (32, 1, 3, 3) stored as [32][9]
    CHECK(pa[0].name == "clf.block0.conv.w");
    CHECK(pa[0].value->dims[0] == 32);
    CHECK(pa[0].value->dims[1] == 9);
    // biases zero, batch-norm scale 1 shift 0
    for (auto& p : pa) {
        if (p.name.ends_with(".b") || p.name.ends_with(".beta") ||
            p.name.ends_with(".running_mean"))
            for (auto v : p.value->data) CHECK(v == 0.0f);
        if (p.name.ends_with(".gamma") || p.name.ends_with(".running_var"))
            for (auto v : p.value->data) CHECK(v == 1.0f);
    }
}

TEST_CASE("discriminator first layer shape matches the pair width") {
    Discriminator<float> d;
    d.init({96, {256, 128, 64}, 0.2}, 3);
    auto p = d.params("d");
    REQUIRE(p[0].name == "d.fc1.w");
    CHECK(p[0].value->dims[0] == 256);
    CHECK(p[0].value->dims[1] == 96);
}

TEST_CASE("all-zero eval input gives uniform logits") {
    Classifier<float> clf;
    clf.init(ClassifierConfig{}, 42);
    Tensor<float> x(3, 1, 32, 32);
    x.zero();
    auto out = clf.forward(x, Mode::Eval);
    for (int64_t i = 0; i < 3; ++i)
        for (int64_t j = 0; j < 10; ++j)
            CHECK(out.logits.at(i, j) == doctest::Approx(out.logits.at(i, 0)).epsilon(1e-6));
    // softmax of equal logits is exactly uniform
    std::vector<int> labels{0, 5, 9};
    float loss = softmax_xent(out.logits, labels, nullptr);
    CHECK(loss == doctest::Approx(std::log(10.0)).epsilon(1e-6));
}

TEST_CASE("eval mode is per-example independent") {
    Classifier<float> clf;
    clf.init(ClassifierConfig{}, 9);
    // push some statistics through batch norm first
    auto warm = clf.forward(random_batch(8, 32, 2), Mode::Train);
    (void)warm;
    Tensor<float> x = random_batch(4, 32, 3);
    // duplicate row 1 into row 3
    for (int64_t i = 0; i < 32 * 32; ++i) x[3 * 1024 + i] = x[1 * 1024 + i];
    auto out = clf.forward(x, Mode::Eval);
    for (int64_t j = 0; j < 10; ++j) CHECK(out.logits.at(3, j) == out.logits.at(1, j));

    // eval purity: running statistics unchanged by eval passes
    auto params = clf.params();
    std::vector<std::vector<float>> before;
    for (auto& p : params)
        if (!p.grad) before.push_back(p.value->data);
    clf.forward(random_batch(6, 32, 4), Mode::Eval);
    size_t idx = 0;
    for (auto& p : params)
        if (!p.grad) CHECK(p.value->data == before[idx++]);
}

TEST_CASE("train mode rejects tiny batches and bad shapes") {
    Classifier<float> clf;
    clf.init(ClassifierConfig{}, 1);
    CHECK_THROWS_AS(clf.forward(random_batch(1, 32, 1), Mode::Train), BadShape);
    Tensor<float> wrong(4, 1, 28, 28);
    CHECK_THROWS_AS(clf.forward(wrong, Mode::Train), BadShape);
}

TEST_CASE("discriminator zero parameters give exactly one half") {
    Discriminator<float> d;
    d.init({96, {256, 128, 64}, 0.2}, 5);
    for (auto& p : d.params("d")) {
        if (p.name.ends_with(".w") || p.name.ends_with(".b") || p.name.ends_with(".beta"))
            p.value->zero();
    }
    Tensor<float> x(8, 96);
    Rng rng(3);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform());
    auto probs = d.forward_probabilities(x, Mode::Train);
    for (auto v : probs.data) CHECK(v == 0.5f);
}

TEST_CASE("discriminator rejects width mismatch and emits open-interval probabilities") {
    Discriminator<float> d;
    d.init({96, {256, 128, 64}, 0.2}, 5);
    Tensor<float> wrong(4, 100);
    CHECK_THROWS_AS(d.forward_scores(wrong, Mode::Train), BadShape);

    Tensor<float> x(1000, 96);
    Rng rng(3);
    for (auto& v : x.data) v = static_cast<float>(rng.uniform() * 4 - 2);
    auto probs = d.forward_probabilities(x, Mode::Train);
    for (auto v : probs.data) {
        CHECK(v > 0.0f);
        CHECK(v < 1.0f);
    }
}

TEST_CASE("softmax cross entropy matches hand-computed values") {
    SUBCASE("uniform logits") {
        Tensor<float> logits(3, 10);
        logits.fill(0.25f);
        float loss = softmax_xent(logits, {1, 2, 3}, nullptr);
        CHECK(loss == doctest::Approx(2.302585093).epsilon(1e-6));
    }
    SUBCASE("saturated true class") {
        Tensor<float> logits(2, 10);
        logits.zero();
        logits.at(0, 4) = 1000.0f;
        logits.at(1, 7) = 1000.0f;
        float loss = softmax_xent(logits, {4, 7}, nullptr);
        CHECK(loss < 1e-6f);
    }
    SUBCASE("single elevated logit, closed form ln((9+e)/e)") {
        Tensor<double> logits(1, 10);
        logits.zero();
        logits.at(0, 0) = 1.0;
        double loss = softmax_xent(logits, {0}, nullptr);
        const double expect = std::log((9.0 + std::exp(1.0)) / std::exp(1.0));  // 1.4611503
        CHECK(loss == doctest::Approx(expect).epsilon(1e-12));
        CHECK(loss == doctest::Approx(1.4611503).epsilon(1e-7));
    }
    SUBCASE("bad labels throw") {
        Tensor<float> logits(2, 10);
        CHECK_THROWS_AS(softmax_xent(logits, {0, 10}, nullptr), BadLabel);
        CHECK_THROWS_AS(softmax_xent(logits, {-1, 0}, nullptr), BadLabel);
    }
    SUBCASE("gradient rows sum to zero") {
        Tensor<float> logits(4, 10);
        Rng rng(5);
        for (auto& v : logits.data) v = static_cast<float>(rng.uniform() * 2 - 1);
        Tensor<float> dlogits;
        softmax_xent(logits, {0, 3, 5, 9}, &dlogits);
        for (int64_t i = 0; i < 4; ++i) {
            float s = 0;
            for (int64_t j = 0; j < 10; ++j) s += dlogits.at(i, j);
            CHECK(s == doctest::Approx(0.0f).epsilon(1e-6));
        }
    }
}

TEST_CASE("miniature config still produces the right head width") {
    ClassifierConfig mini;
    mini.conv_channels = {4, 4, 4, 4};
    mini.input_hw = 16;
    CHECK(mini.head_width() == 4);  // 4 channels x 1 x 1
    Classifier<float> clf;
    clf.init(mini, 3);
    auto out = clf.forward(random_batch(4, 16, 1), Mode::Train);
    CHECK(out.logits.dims[1] == 10);
    CHECK(out.taps[3].dims[2] == 1);
}
