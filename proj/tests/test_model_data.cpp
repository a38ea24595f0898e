#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>
#include <set>

#include "glora/data.hpp"
#include "glora/model.hpp"
#include "glora/ops.hpp"

namespace {

using namespace glora;

ModelConfig tiny_config() {
    ModelConfig cfg;
    cfg.image_size = 8;
    cfg.patch_size = 4;
    cfg.dim = 16;
    cfg.heads = 2;
    cfg.layers = 2;
    cfg.mlp_ratio = 2;
    cfg.num_classes = 4;
    return cfg;
}

Tensor rand_images(const ModelConfig& cfg, int batch, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    Tensor imgs = Tensor::randn(Shape{batch, cfg.channels, cfg.image_size, cfg.image_size}, rng, 0.25, 0.5);
    return imgs;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
}

TEST(Sites, EnumerationIsLayerMajor) {
    auto sites = enumerate_sites(4);
    ASSERT_EQ(sites.size(), 24u);
    EXPECT_EQ(sites[0], (SiteId{0, SiteKind::q}));
    EXPECT_EQ(sites[5], (SiteId{0, SiteKind::mlp_3}));
    EXPECT_EQ(sites[6], (SiteId{1, SiteKind::q}));
    EXPECT_EQ(sites[23], (SiteId{3, SiteKind::mlp_3}));
    for (std::size_t i = 1; i < sites.size(); ++i) EXPECT_TRUE(sites[i - 1] < sites[i]);
}

TEST(Sites, NamesRoundTrip) {
    for (SiteKind k : {SiteKind::q, SiteKind::k, SiteKind::v, SiteKind::mlp_1, SiteKind::mlp_2, SiteKind::mlp_3}) {
        EXPECT_EQ(site_kind_from(to_string(k)), k);
    }
    EXPECT_THROW(site_kind_from("mlp_4"), ConfigError);
    EXPECT_EQ(to_string(SiteId{2, SiteKind::mlp_2}), "2.mlp_2");
}

TEST(ModelConfigT, ValidateAndDerived) {
    ModelConfig cfg;  // desk defaults
    cfg.validate();
    EXPECT_EQ(cfg.tokens(), 16);
    EXPECT_EQ(cfg.patch_dim(), 16);
    EXPECT_EQ(cfg.hidden_dim(), 256);
    EXPECT_EQ(cfg.site_shape(SiteKind::q), (std::pair<int, int>{64, 64}));
    EXPECT_EQ(cfg.site_shape(SiteKind::mlp_1), (std::pair<int, int>{64, 64}));
    EXPECT_EQ(cfg.site_shape(SiteKind::mlp_2), (std::pair<int, int>{64, 256}));
    EXPECT_EQ(cfg.site_shape(SiteKind::mlp_3), (std::pair<int, int>{256, 64}));

    ModelConfig bad = cfg;
    bad.patch_size = 5;  // 16 % 5 != 0
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.heads = 3;  // 64 % 3 != 0
    EXPECT_THROW(bad.validate(), ConfigError);
    bad = cfg;
    bad.layers = 0;
    EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(TinyViTModel, PatchifyHandValues) {
    ModelConfig cfg = tiny_config();
    cfg.image_size = 4;
    cfg.patch_size = 2;
    cfg.dim = 8;
    cfg.heads = 2;
    cfg.layers = 1;
    TinyViT model(cfg, 1);
    std::vector<double> px(16);
    for (int i = 0; i < 16; ++i) px[static_cast<std::size_t>(i)] = i;
    Tensor imgs = Tensor::from(Shape{1, 1, 4, 4}, px);
    Tensor p = model.patchify(imgs);
    ASSERT_EQ(p.shape, (Shape{1, 4, 4}));
    const double expect[16] = {0, 1, 4, 5, 2, 3, 6, 7, 8, 9, 12, 13, 10, 11, 14, 15};
    for (int i = 0; i < 16; ++i) EXPECT_DOUBLE_EQ(p.at(i), expect[i]);
    EXPECT_THROW(model.patchify(Tensor::zeros(Shape{1, 1, 5, 5})), DimensionError);
}

TEST(TinyViTModel, ForwardShapesAndDeterminism) {
    ModelConfig cfg = tiny_config();
    TinyViT m1(cfg, 7);
    TinyViT m2(cfg, 7);
    TinyViT m3(cfg, 8);
    Tensor imgs = rand_images(cfg, 3, 99);
    auto o1 = m1.forward(imgs);
    auto o2 = m2.forward(imgs);
    auto o3 = m3.forward(imgs);
    EXPECT_EQ(o1.logits.shape, (Shape{3, 4}));
    EXPECT_EQ(o1.embedding.shape, (Shape{3, 16}));
    EXPECT_TRUE(o1.logits.same_bits(o2.logits));
    EXPECT_TRUE(o1.embedding.same_bits(o2.embedding));
    bool differs = false;
    for (std::size_t i = 0; i < o1.logits.numel(); ++i) differs = differs || o1.logits.at(i) != o3.logits.at(i);
    EXPECT_TRUE(differs);
}

TEST(TinyViTModel, VisitParamsManifest) {
    ModelConfig cfg = tiny_config();
    TinyViT model(cfg, 3);
    std::set<std::string> names;
    int head_count = 0;
    int count = 0;
    model.visit_params([&](const std::string& name, Tensor&) {
        EXPECT_TRUE(names.insert(name).second) << "duplicate " << name;
        ++count;
        if (TinyViT::is_head(name)) ++head_count;
        EXPECT_NE(TinyViT::is_head(name), TinyViT::is_trunk(name));
    });
    EXPECT_EQ(count, 8 + 16 * cfg.layers);
    EXPECT_EQ(head_count, 2);
}

TEST(TinyViTModel, AttachAdaptersShapesAndLookups) {
    ModelConfig cfg = tiny_config();
    TinyViT model(cfg, 3);
    EXPECT_EQ(model.adapter_at({0, SiteKind::q}), nullptr);
    AdapterSpec spec;
    spec.kind = AdapterKind::DoRA;
    spec.rank = 2;
    spec.alpha = 2.0;
    model.attach_adapters(spec, 5);
    ASSERT_EQ(model.adapters.size(), static_cast<std::size_t>(6 * cfg.layers));
    auto sites = enumerate_sites(cfg.layers);
    for (std::size_t i = 0; i < sites.size(); ++i) EXPECT_EQ(model.adapters[i].site, sites[i]);
    AdapterBlock* m2 = model.adapter_at({1, SiteKind::mlp_2});
    ASSERT_NE(m2, nullptr);
    EXPECT_EQ(m2->a.shape, (Shape{16, 2}));
    EXPECT_EQ(m2->b.shape, (Shape{2, 32}));
    EXPECT_EQ(m2->magnitude.shape, (Shape{32}));
    AdapterBlock* m3 = model.adapter_at({1, SiteKind::mlp_3});
    ASSERT_NE(m3, nullptr);
    EXPECT_EQ(m3->a.shape, (Shape{32, 2}));
    EXPECT_EQ(m3->b.shape, (Shape{2, 16}));
    EXPECT_THROW(model.attach_adapters(spec, 6), ContractError);
    EXPECT_EQ(model.gate_snapshot().size(), model.adapters.size());
    EXPECT_EQ(model.scores().size(), model.adapters.size());
}

TEST(TinyViTModel, AllGatesOffMatchesBaseBitwise) {
    ModelConfig cfg = tiny_config();
    TinyViT base(cfg, 11);
    TinyViT gated = base.clone();
    AdapterSpec spec;
    spec.rank = 2;
    spec.alpha = 2.0;
    spec.s_init = 0.05;  // below tau: every gate starts off
    gated.attach_adapters(spec, 17);
    std::mt19937_64 rng(4);
    for (auto& ad : gated.adapters) ad.b = Tensor::randn(ad.b.shape, rng, 0.3);  // make the off state do real work
    Tensor imgs = rand_images(cfg, 2, 21);
    auto ob = base.forward(imgs);
    auto og = gated.forward(imgs);
    EXPECT_TRUE(ob.logits.same_bits(og.logits));
    EXPECT_TRUE(ob.embedding.same_bits(og.embedding));

    gated.adapters[3].gate.set_score(0.5);  // flip one gate on; outputs must move
    auto on = gated.forward(imgs);
    bool differs = false;
    for (std::size_t i = 0; i < on.logits.numel(); ++i) differs = differs || on.logits.at(i) != ob.logits.at(i);
    EXPECT_TRUE(differs);
}

TEST(TinyViTModel, TrainabilityModes) {
    ModelConfig cfg = tiny_config();
    TinyViT model(cfg, 13);
    model.attach_adapters(AdapterSpec{}, 14);
    EXPECT_THROW(model.set_trainable_pretrain(), ContractError);
    model.set_trainable_finetune();
    model.visit_params([&](const std::string& name, Tensor& t) {
        EXPECT_EQ(t.requires_grad, TinyViT::is_head(name)) << name;
    });
    for (auto& ad : model.adapters) {
        EXPECT_TRUE(ad.a.requires_grad);
        EXPECT_TRUE(ad.b.requires_grad);
        EXPECT_TRUE(ad.gate.trainable);
    }

    TinyViT plain(cfg, 13);
    plain.set_trainable_pretrain();
    plain.visit_params([](const std::string&, Tensor& t) { EXPECT_TRUE(t.requires_grad); });
}

TEST(TinyViTModel, FinetuneGradsRespectFreezing) {
    ModelConfig cfg = tiny_config();
    TinyViT model(cfg, 15);
    AdapterSpec spec;
    spec.rank = 2;
    model.attach_adapters(spec, 16);
    std::mt19937_64 rng(5);
    for (auto& ad : model.adapters) ad.b = Tensor::randn(ad.b.shape, rng, 0.1);
    model.set_trainable_finetune();
    Tensor imgs = rand_images(cfg, 2, 31);
    {
        Tape tape;
        auto out = model.forward(imgs);
        Tensor loss = cross_entropy(out.logits, {0, 1});
        backward(loss);
    }
    double head_norm = 0;
    model.visit_params([&](const std::string& name, Tensor& t) {
        double n = 0;
        for (double g : *t.grad) n += g * g;
        if (TinyViT::is_head(name)) {
            head_norm += n;
        } else {
            EXPECT_EQ(n, 0.0) << "trunk tensor " << name << " received gradient";
        }
    });
    EXPECT_GT(head_norm, 0.0);
    double factor_norm = 0, score_norm = 0;
    for (auto& ad : model.adapters) {
        for (double g : *ad.a.grad) factor_norm += g * g;
        for (double g : *ad.b.grad) factor_norm += g * g;
        score_norm += (*ad.gate.score.grad)[0] * (*ad.gate.score.grad)[0];
    }
    EXPECT_GT(factor_norm, 0.0);
    EXPECT_GT(score_norm, 0.0);
}

TEST(TinyViTModel, CloneIsDeep) {
    ModelConfig cfg = tiny_config();
    TinyViT model(cfg, 19);
    model.attach_adapters(AdapterSpec{}, 20);
    TinyViT copy = model.clone();
    Tensor imgs = rand_images(cfg, 2, 41);
    auto before = copy.forward(imgs);
    model.head.w.at(0) += 100.0;
    model.adapters[0].gate.set_score(0.0);
    auto after = copy.forward(imgs);
    EXPECT_TRUE(before.logits.same_bits(after.logits));
    EXPECT_DOUBLE_EQ(copy.adapters[0].gate.score.value(), 0.5);
}

TEST(SynthData, ShapesLabelsDeterminism) {
    SynthSpec spec = SynthSpec::defaults(SynthSpec::Mode::source);
    spec.num_classes = 4;
    spec.samples_per_class = 3;
    spec.seed = 9;
    Dataset ds = synth_generate(spec);
    ds.validate();
    EXPECT_EQ(ds.images.shape, (Shape{12, 1, 16, 16}));
    EXPECT_EQ(ds.num_classes, 4);
    std::vector<int> per_class(4, 0);
    for (int l : ds.labels) ++per_class[static_cast<std::size_t>(l)];
    for (int c : per_class) EXPECT_EQ(c, 3);

    Dataset again = synth_generate(spec);
    EXPECT_TRUE(ds.images.same_bits(again.images));
    EXPECT_EQ(ds.labels, again.labels);

    spec.seed = 10;
    Dataset other = synth_generate(spec);
    EXPECT_FALSE(ds.images.same_bits(other.images));

    SynthSpec tgt = SynthSpec::defaults(SynthSpec::Mode::target);
    EXPECT_NE(tgt.orientation_offset, SynthSpec::defaults(SynthSpec::Mode::source).orientation_offset);
}

TEST(SynthData, NoiselessPixelsStayInRange) {
    SynthSpec spec = SynthSpec::defaults(SynthSpec::Mode::target);
    spec.num_classes = 3;
    spec.samples_per_class = 2;
    spec.sigma = 0.0;
    Dataset ds = synth_generate(spec);
    for (std::size_t i = 0; i < ds.images.numel(); ++i) {
        EXPECT_GE(ds.images.at(i), 0.0);
        EXPECT_LE(ds.images.at(i), 1.0);
    }
}

TEST(SynthData, SpecValidation) {
    SynthSpec spec = SynthSpec::defaults(SynthSpec::Mode::source);
    spec.sigma = -0.1;
    EXPECT_THROW(spec.validate(), DataError);
    spec = SynthSpec::defaults(SynthSpec::Mode::source);
    spec.freq_lo = 5.0;  // inverted band
    EXPECT_THROW(spec.validate(), DataError);
    spec = SynthSpec::defaults(SynthSpec::Mode::source);
    spec.samples_per_class = 0;
    EXPECT_THROW(spec.validate(), DataError);
}

TEST(IdxFiles, RoundTripAndValidation) {
    namespace fs = std::filesystem;
    SynthSpec spec = SynthSpec::defaults(SynthSpec::Mode::source);
    spec.num_classes = 3;
    spec.samples_per_class = 2;
    spec.sigma = 0.0;
    Dataset ds = synth_generate(spec);
    fs::path dir = fs::temp_directory_path() / "glora_idx_test";
    fs::create_directories(dir);
    const std::string img1 = (dir / "a-images.idx3-ubyte").string();
    const std::string lab1 = (dir / "a-labels.idx1-ubyte").string();
    idx_save(ds, img1, lab1);
    Dataset back = idx_load(img1, lab1);
    back.validate();
    EXPECT_EQ(back.images.shape, ds.images.shape);
    EXPECT_EQ(back.labels, ds.labels);
    // u8 quantization happened exactly once: a second round trip is stable.
    const std::string img2 = (dir / "b-images.idx3-ubyte").string();
    const std::string lab2 = (dir / "b-labels.idx1-ubyte").string();
    idx_save(back, img2, lab2);
    EXPECT_EQ(read_file(img1), read_file(img2));
    EXPECT_EQ(read_file(lab1), read_file(lab2));
    // Default label path derivation: images->labels, idx3->idx1.
    Dataset derived = idx_load(img1);
    EXPECT_EQ(derived.labels, ds.labels);

    std::ofstream bad((dir / "bad-images.idx3-ubyte").string(), std::ios::binary);
    bad.write("\x00\x00\x08\x99", 4);
    bad.close();
    EXPECT_THROW(idx_load((dir / "bad-images.idx3-ubyte").string(), lab1), DataError);
    EXPECT_THROW(idx_load((dir / "missing.idx3-ubyte").string(), lab1), DataError);
    fs::remove_all(dir);
}

TEST(DatasetUri, SynthSplitsAndErrors) {
    Dataset val = load_dataset("synth:source?seed=5&split=val&k=4&n=3&size=16&sigma=0.05");
    SynthSpec spec = SynthSpec::defaults(SynthSpec::Mode::source);
    spec.seed = 5 * 1000003u + 1;  // split streams are disjoint and deterministic
    spec.num_classes = 4;
    spec.samples_per_class = 3;
    Dataset direct = synth_generate(spec);
    EXPECT_TRUE(val.images.same_bits(direct.images));
    EXPECT_EQ(val.split, "val");
    EXPECT_EQ(val.name, "synth-source");

    Dataset train = load_dataset("synth:source?seed=5&split=train&k=4&n=3");
    EXPECT_FALSE(train.images.same_bits(val.images));

    EXPECT_THROW(load_dataset("synth:source?seed=5&split=dev"), DataError);
    EXPECT_THROW(load_dataset("synth:source?bogus=1"), DataError);
    EXPECT_THROW(load_dataset("synth:diagonal"), DataError);
    EXPECT_THROW(load_dataset("csv:foo.csv"), DataError);
    EXPECT_THROW(load_dataset("no-scheme"), DataError);
    EXPECT_THROW(load_dataset("synth:source?seed=abc"), DataError);
}

TEST(DatasetUri, IdxScheme) {
    namespace fs = std::filesystem;
    SynthSpec spec = SynthSpec::defaults(SynthSpec::Mode::source);
    spec.num_classes = 2;
    spec.samples_per_class = 2;
    Dataset ds = synth_generate(spec);
    fs::path dir = fs::temp_directory_path() / "glora_idx_uri";
    fs::create_directories(dir);
    const std::string img = (dir / "t-images.idx3-ubyte").string();
    const std::string lab = (dir / "t-labels.idx1-ubyte").string();
    idx_save(ds, img, lab);
    Dataset loaded = load_dataset("idx:" + img + "?labels=" + lab);
    EXPECT_EQ(loaded.labels, ds.labels);
    Dataset derived = load_dataset("idx:" + img);
    EXPECT_EQ(derived.labels, ds.labels);
    fs::remove_all(dir);
}

}  // namespace
