#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <set>

#include "morphbench/csv.hpp"
#include "morphbench/dataset_io.hpp"
#include "morphbench/errors.hpp"
#include "morphbench/image_io.hpp"
#include "morphbench/synthetic.hpp"
#include "test_util.hpp"

using namespace morphbench;

namespace {

Dataset tiny_dataset(int n_drug, int n_control, int level = 4, double t = 48.0) {
    Dataset d;
    Rng rng(11);
    for (int i = 0; i < n_drug; ++i) {
        SampleMeta m;
        m.sample_id = "drugrow" + std::to_string(i);
        m.cell_line = "CL00";
        m.drug = "drugA";
        m.concentration_level = level;
        m.time_point = t;
        m.label = Label::drug;
        m.replicate = "r0";
        ImageCrop img;
        for (auto& v : img.px) v = static_cast<float>(rng.uniform());
        d.push_back(std::move(img), std::move(m));
    }
    for (int i = 0; i < n_control; ++i) {
        SampleMeta m;
        m.sample_id = "ctrlrow" + std::to_string(i);
        m.cell_line = "CL00";
        m.drug = "DMSO";
        m.concentration_level = 0;
        m.time_point = 12.0 + i;
        m.label = Label::control;
        m.replicate = "r0";
        ImageCrop img;
        for (auto& v : img.px) v = static_cast<float>(rng.uniform());
        d.push_back(std::move(img), std::move(m));
    }
    return d;
}

}  // namespace

TEST_CASE("image crop invariants") {
    ImageCrop img;
    CHECK(img.valid());
    img.px[0] = 1.5f;
    CHECK_FALSE(img.valid());
    img.px[0] = -0.1f;
    CHECK_FALSE(img.valid());
    img.px.resize(100);
    CHECK_FALSE(img.valid());
}

TEST_CASE("label strings round-trip; unknown labels are hard errors") {
    CHECK(label_from_string("control") == Label::control);
    CHECK(label_from_string("drug") == Label::drug);
    CHECK_THROWS_AS(label_from_string("placebo"), DataError);
}

TEST_CASE("ingest_folder decodes a valid folder") {
    test::TempDir dir;
    csv::Table meta;
    meta.header = {"sample_id", "cell_line", "drug", "concentration_level",
                   "time_point", "label", "replicate", "filename"};
    Rng rng(3);
    for (int i = 0; i < 10; ++i) {
        imageio::Gray8 img;
        img.width = img.height = 64;
        img.px.resize(64 * 64);
        for (auto& v : img.px) v = static_cast<std::uint8_t>(rng.uniform_index(256));
        img.px[0] = 0;
        img.px[1] = 255;
        const std::string name = "crop" + std::to_string(i) + ".png";
        imageio::write_png(dir.path / name, img);
        meta.rows.push_back({"s" + std::to_string(i), "CL00", i % 2 ? "drugA" : "DMSO", "4",
                             "48", i % 2 ? "drug" : "control", "r0", name});
    }
    csv::write_file(dir.path / "meta.csv", meta);

    Dataset ds = ingest_folder(dir.path, dir.path / "meta.csv");
    CHECK(ds.size() == 10);
    // 8-bit endpoints map to exactly 0.0 and 1.0
    CHECK(ds.images[0].px[0] == doctest::Approx(0.0));
    CHECK(ds.images[0].px[1] == doctest::Approx(1.0));
}

TEST_CASE("ingest_folder reports the missing file by path") {
    test::TempDir dir;
    csv::Table meta;
    meta.header = {"sample_id", "cell_line", "drug", "concentration_level",
                   "time_point", "label", "replicate", "filename"};
    meta.rows.push_back({"s0", "CL00", "DMSO", "0", "12", "control", "r0", "absent.png"});
    csv::write_file(dir.path / "meta.csv", meta);
    CHECK_THROWS_WITH_AS(ingest_folder(dir.path, dir.path / "meta.csv"),
                         doctest::Contains("absent.png"), DataError);
}

TEST_CASE("ingest_folder rejects wrong sizes, corrupt files and unknown labels") {
    test::TempDir dir;
    imageio::Gray8 small;
    small.width = small.height = 32;
    small.px.assign(32 * 32, 100);
    imageio::write_png(dir.path / "small.png", small);
    {
        std::ofstream bad(dir.path / "bad.png", std::ios::binary);
        bad << "not a png at all";
    }
    imageio::Gray8 ok;
    ok.width = ok.height = 64;
    ok.px.assign(64 * 64, 10);
    imageio::write_png(dir.path / "ok.png", ok);

    auto write_meta = [&](const std::string& filename, const std::string& label) {
        csv::Table meta;
        meta.header = {"sample_id", "cell_line", "drug", "concentration_level",
                       "time_point", "label", "replicate", "filename"};
        meta.rows.push_back({"s0", "CL00", "DMSO", "0", "12", label, "r0", filename});
        csv::write_file(dir.path / "meta.csv", meta);
    };
    write_meta("small.png", "control");
    CHECK_THROWS_AS(ingest_folder(dir.path, dir.path / "meta.csv"), DataError);
    write_meta("bad.png", "control");
    CHECK_THROWS_AS(ingest_folder(dir.path, dir.path / "meta.csv"), DataError);
    write_meta("ok.png", "sort_of_control");
    CHECK_THROWS_AS(ingest_folder(dir.path, dir.path / "meta.csv"), DataError);
}

TEST_CASE("tiff reader handles a minimal uncompressed grayscale file") {
    test::TempDir dir;
    // Hand-built little-endian TIFF: 2x2, one strip.
    std::vector<std::uint8_t> bytes = {'I', 'I', 42, 0, 8, 0, 0, 0};
    auto put16 = [&](std::uint16_t v) {
        bytes.push_back(v & 0xff);
        bytes.push_back(v >> 8);
    };
    auto put32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back((v >> (8 * i)) & 0xff);
    };
    put16(8);  // entry count
    auto entry = [&](std::uint16_t tag, std::uint16_t type, std::uint32_t count, std::uint32_t value) {
        put16(tag);
        put16(type);
        put32(count);
        put32(value);
    };
    const std::uint32_t pixel_offset = 8 + 2 + 8 * 12 + 4;
    entry(256, 3, 1, 2);             // width
    entry(257, 3, 1, 2);             // height
    entry(258, 3, 1, 8);             // bits per sample
    entry(259, 3, 1, 1);             // no compression
    entry(262, 3, 1, 1);             // black is zero
    entry(273, 4, 1, pixel_offset);  // strip offset
    entry(277, 3, 1, 1);             // samples per pixel
    entry(279, 4, 1, 4);             // strip byte count
    put32(0);                        // next IFD
    bytes.insert(bytes.end(), {10, 20, 30, 40});
    {
        std::ofstream out(dir.path / "t.tif", std::ios::binary);
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
    }
    auto img = imageio::read_tiff(dir.path / "t.tif");
    CHECK(img.width == 2);
    CHECK(img.height == 2);
    CHECK(img.px == std::vector<std::uint8_t>{10, 20, 30, 40});
}

TEST_CASE("balance_subset downsamples the majority label deterministically") {
    Dataset d = tiny_dataset(100, 300);
    Dataset b1 = balance_subset(d, 5);
    Dataset b2 = balance_subset(d, 5);
    std::size_t drug = 0, control = 0;
    for (const auto& m : b1.meta) (m.label == Label::drug ? drug : control) += 1;
    CHECK(drug == 100);
    CHECK(control == 100);
    REQUIRE(b1.size() == b2.size());
    for (std::size_t i = 0; i < b1.size(); ++i)
        CHECK(b1.meta[i].sample_id == b2.meta[i].sample_id);

    Dataset b3 = balance_subset(d, 6);
    bool differs = b3.size() != b1.size();
    for (std::size_t i = 0; !differs && i < b1.size(); ++i)
        differs = b1.meta[i].sample_id != b3.meta[i].sample_id;
    CHECK(differs);  // another seed picks another control subset
}

TEST_CASE("balance_subset keeps already balanced data intact") {
    Dataset d = tiny_dataset(50, 50);
    Dataset b = balance_subset(d, 1);
    REQUIRE(b.size() == 100);
    std::set<std::string> in, out;
    for (const auto& m : d.meta) in.insert(m.sample_id);
    for (const auto& m : b.meta) out.insert(m.sample_id);
    CHECK(in == out);
}

TEST_CASE("balance_subset: single-label input is a hard error") {
    Dataset controls_only = tiny_dataset(0, 10);
    CHECK_THROWS_WITH_AS(balance_subset(controls_only, 1), doctest::Contains("missing label: drug"),
                         DataError);
}

TEST_CASE("balance_subset keeps only max concentration at the latest time point") {
    Dataset d;
    auto add = [&](const std::string& id, int level, double t, Label label) {
        SampleMeta m;
        m.sample_id = id;
        m.cell_line = "CL00";
        m.drug = label == Label::drug ? "drugA" : "DMSO";
        m.concentration_level = level;
        m.time_point = t;
        m.label = label;
        m.replicate = "r0";
        d.push_back(ImageCrop{}, std::move(m));
    };
    add("low_conc", 2, 48.0, Label::drug);
    add("early", 4, 24.0, Label::drug);
    add("late1", 4, 48.0, Label::drug);
    add("late2", 4, 48.0, Label::drug);
    add("c1", 0, 12.0, Label::control);
    add("c2", 0, 24.0, Label::control);

    Dataset b = balance_subset(d, 3);
    std::set<std::string> ids;
    for (const auto& m : b.meta) ids.insert(m.sample_id);
    CHECK(ids.count("late1") == 1);
    CHECK(ids.count("late2") == 1);
    CHECK(ids.count("low_conc") == 0);
    CHECK(ids.count("early") == 0);
    // both controls survive (2 drug vs 2 control)
    CHECK(ids.count("c1") == 1);
    CHECK(ids.count("c2") == 1);
}

TEST_CASE("split: sizes, determinism, stratification") {
    Dataset d = tiny_dataset(500, 500);
    DatasetSplit s = split(d, 0.1, 9);
    CHECK(s.val_ids.size() == 100);
    CHECK(s.train_ids.size() == 900);

    DatasetSplit again = split(d, 0.1, 9);
    CHECK(s.val_ids == again.val_ids);
    CHECK(s.train_ids == again.train_ids);

    // disjoint and covering
    for (const auto& id : s.val_ids) CHECK(s.train_ids.count(id) == 0);

    // stratified: each label contributes ~10%
    std::size_t val_drug = 0;
    for (const auto& m : d.meta)
        if (s.is_val(m.sample_id) && m.label == Label::drug) ++val_drug;
    CHECK(val_drug == 50);
}

TEST_CASE("split: N=10 with 5/5 labels and val_fraction 0.2 takes one per label") {
    // Hand enumeration: round(0.2*10)=2 total, one from each label stratum.
    Dataset d = tiny_dataset(5, 5);
    DatasetSplit s = split(d, 0.2, 4);
    CHECK(s.val_ids.size() == 2);
    std::size_t val_drug = 0, val_control = 0;
    for (const auto& m : d.meta) {
        if (!s.is_val(m.sample_id)) continue;
        (m.label == Label::drug ? val_drug : val_control) += 1;
    }
    CHECK(val_drug == 1);
    CHECK(val_control == 1);
}

TEST_CASE("split rejects out-of-range fractions") {
    Dataset d = tiny_dataset(5, 5);
    CHECK_THROWS_AS(split(d, 0.0, 1), DataError);
    CHECK_THROWS_AS(split(d, 1.0, 1), DataError);
    CHECK_THROWS_AS(split(d, -0.5, 1), DataError);
}

TEST_CASE("dataset serialization round-trips samples in order") {
    test::TempDir dir;
    Dataset d = tiny_dataset(7, 5);
    save_dataset(d, dir.path / "ds");
    Dataset back = load_dataset(dir.path / "ds");
    REQUIRE(back.size() == d.size());
    for (std::size_t i = 0; i < d.size(); ++i) {
        CHECK(back.meta[i].sample_id == d.meta[i].sample_id);
        CHECK(back.meta[i].drug == d.meta[i].drug);
        CHECK(back.meta[i].time_point == d.meta[i].time_point);
        CHECK(back.images[i].px == d.images[i].px);
    }
    CHECK(dataset_checksum(back) == dataset_checksum(d));
    CHECK(load_dataset_checksum(dir.path / "ds") == dataset_checksum(d));
}

TEST_CASE("generate_synthetic: deterministic, counted, in-range") {
    SyntheticConfig cfg;
    cfg.n_cell_lines = 2;
    cfg.n_drugs = 3;
    cfg.images_per_condition = 10;
    cfg.seed = 21;
    Dataset a = generate_synthetic(cfg);
    // 2 * (3 drugs * 5 levels * 10 + 4 time points * 10) = 380
    CHECK(a.size() == 380);
    Dataset b = generate_synthetic(cfg);
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) CHECK(a.images[i].px == b.images[i].px);
    a.check();
}

TEST_CASE("generate_synthetic rejects zero images_per_condition") {
    SyntheticConfig cfg;
    cfg.images_per_condition = 0;
    CHECK_THROWS_AS(generate_synthetic(cfg), DataError);
}

TEST_CASE("fragmentation 0 uses the control renderer branch") {
    SyntheticConfig cfg;
    cfg.n_cell_lines = 1;
    cfg.n_drugs = 1;
    cfg.fragmentation_per_drug = {0.0};
    const RenderParams drug = drug_render_params(cfg, 0, 0, 4);
    const RenderParams control = control_render_params(cfg, 0, SyntheticConfig::kTimePoints[3]);
    CHECK(drug == control);
    CHECK(drug.n_fragments == 0);
}

TEST_CASE("full fragmentation shrinks mean blob area (noise-free render)") {
    SyntheticConfig cfg;
    cfg.n_cell_lines = 1;
    cfg.n_drugs = 1;
    cfg.noise_sigma = 0.0;

    auto mean_area = [&](double fragmentation) {
        cfg.fragmentation_per_drug = {fragmentation};
        double total = 0.0;
        int n_components = 0;
        for (int trial = 0; trial < 20; ++trial) {
            Rng rng(100 + trial);
            const ImageCrop img = render_crop(drug_render_params(cfg, 0, 0, 4), rng);
            auto components = test::connected_components(img, 0.2f);
            for (std::size_t area : components) {
                total += static_cast<double>(area);
                ++n_components;
            }
        }
        return n_components ? total / n_components : 0.0;
    };
    const double area_f0 = mean_area(0.0);
    const double area_f1 = mean_area(1.0);
    CHECK(area_f1 < area_f0);
    CHECK(area_f0 > 0.0);
}

TEST_CASE("synthetic config json round-trip") {
    SyntheticConfig cfg;
    cfg.n_cell_lines = 3;
    cfg.fragmentation_per_drug = {0.5, 0.5, 0.9};
    SyntheticConfig back = SyntheticConfig::from_json(cfg.to_json());
    CHECK(back.n_cell_lines == 3);
    CHECK(back.fragmentation_per_drug == cfg.fragmentation_per_drug);
}
