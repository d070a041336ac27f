#pragma once

// Container schemas for datasets, model checkpoints, and whitening
// transforms. On-disk arrays are f32 (labels i64); in-memory math is double.

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "relseq/container.hpp"
#include "relseq/datagen.hpp"
#include "relseq/gae.hpp"
#include "relseq/hgae.hpp"
#include "relseq/whitening.hpp"

namespace relseq {

// Dataset: frames [n,T,d] f32 sample-major, labels [n] i64 (-1 = none),
// gen_params [n,4] f32; meta records the generator and every knob.
inline void save_dataset(const std::filesystem::path& path, const SequenceData& data,
                         Json meta) {
    ContainerWriter w;
    std::vector<double> flat(data.n * data.T * data.dim);
    for (std::size_t t = 0; t < data.T; ++t)
        for (std::size_t i = 0; i < data.n; ++i)
            for (std::size_t j = 0; j < data.dim; ++j)
                flat[(i * data.T + t) * data.dim + j] = data.frames[t](j, i);
    w.add_f32("frames", {data.n, data.T, data.dim}, flat.data(), flat.size());
    w.add_i64("labels", {data.n}, data.labels.data(), data.labels.size());
    w.add_f32("gen_params", {data.n, 4}, data.gen_params.data(), data.gen_params.size());
    meta["n"] = data.n;
    meta["T"] = data.T;
    meta["dim"] = data.dim;
    w.set_meta(std::move(meta));
    w.write(path);
}

inline SequenceData load_dataset(const Container& c) {
    const ArrayInfo& info = c.info("frames");
    if (info.shape.size() != 3) throw ContainerError("frames array must be [n,T,d]");
    SequenceData data;
    data.n = info.shape[0];
    data.T = info.shape[1];
    data.dim = info.shape[2];
    const auto flat = c.read_values("frames");
    data.frames.assign(data.T, Matrix(data.dim, data.n));
    for (std::size_t t = 0; t < data.T; ++t)
        for (std::size_t i = 0; i < data.n; ++i)
            for (std::size_t j = 0; j < data.dim; ++j)
                data.frames[t](j, i) = flat[(i * data.T + t) * data.dim + j];
    data.labels = c.has("labels") ? c.read_i64("labels") : std::vector<std::int64_t>(data.n, -1);
    data.gen_params = c.has("gen_params") ? c.read_matrix("gen_params") : Matrix(data.n, 4);
    return data;
}

inline SequenceData load_dataset(const std::filesystem::path& path) {
    return load_dataset(Container::read(path));
}

// Dataset with every frame projected through a whitening transform.
inline SequenceData whiten_dataset(const SequenceData& data, const WhiteningTransform& t) {
    SequenceData out;
    out.n = data.n;
    out.T = data.T;
    out.dim = t.d_kept();
    out.labels = data.labels;
    out.gen_params = data.gen_params;
    out.frames.reserve(data.T);
    for (const auto& f : data.frames) out.frames.push_back(whiten_apply(t, f));
    return out;
}

// Whitening transform: arrays mean, forward, inverse, eigenvalues.
inline void save_whitening(const std::filesystem::path& path, const WhiteningTransform& t,
                           Json meta) {
    ContainerWriter w;
    w.add_f32("mean", {t.d_pixels()}, t.mean.data(), t.mean.size());
    w.add_f32("forward", t.forward);
    w.add_f32("inverse", t.inverse);
    // Eigenvalues keep full double precision; retained fractions depend on them.
    w.add_f64("eigenvalues", {static_cast<std::size_t>(t.eigenvalues.rows())},
              t.eigenvalues.data(), t.eigenvalues.size());
    meta["retained_fraction"] = t.retained_fraction;
    meta["eps"] = t.eps;
    meta["d_kept"] = t.d_kept();
    meta["d_pixels"] = t.d_pixels();
    w.set_meta(std::move(meta));
    w.write(path);
}

inline WhiteningTransform load_whitening(const std::filesystem::path& path) {
    const Container c = Container::read(path);
    WhiteningTransform t;
    t.mean = c.read_matrix("mean");
    t.forward = c.read_matrix("forward");
    t.inverse = c.read_matrix("inverse");
    t.eigenvalues = c.read_matrix("eigenvalues");
    t.retained_fraction = c.meta().value("retained_fraction", 1.0);
    t.eps = c.meta().value("eps", 1e-8);
    return t;
}

// Model checkpoint: arrays U1,V1,W1 (+ U2,V2,W2 for two-layer models);
// meta.model is "gae" or "hgae".
struct ModelCheckpoint {
    std::string kind;  // "gae" | "hgae"
    GaeParams gae;
    HgaeParams hgae;
    Json meta;
};

inline void save_checkpoint(const std::filesystem::path& path, const GaeParams& p, Json meta) {
    ContainerWriter w;
    w.add_f32("U1", p.u);
    w.add_f32("V1", p.v);
    w.add_f32("W1", p.w);
    meta["model"] = "gae";
    w.set_meta(std::move(meta));
    w.write(path);
}

inline void save_checkpoint(const std::filesystem::path& path, const HgaeParams& p, Json meta) {
    ContainerWriter w;
    w.add_f32("U1", p.layer1.u);
    w.add_f32("V1", p.layer1.v);
    w.add_f32("W1", p.layer1.w);
    w.add_f32("U2", p.layer2.u);
    w.add_f32("V2", p.layer2.v);
    w.add_f32("W2", p.layer2.w);
    meta["model"] = "hgae";
    w.set_meta(std::move(meta));
    w.write(path);
}

inline ModelCheckpoint load_checkpoint(const std::filesystem::path& path) {
    const Container c = Container::read(path);
    ModelCheckpoint ckpt;
    ckpt.meta = c.meta();
    ckpt.kind = c.meta().value("model", c.has("U2") ? "hgae" : "gae");
    GaeParams l1{c.read_matrix("U1"), c.read_matrix("V1"), c.read_matrix("W1")};
    l1.check_consistent();
    if (ckpt.kind == "hgae") {
        GaeParams l2{c.read_matrix("U2"), c.read_matrix("V2"), c.read_matrix("W2")};
        ckpt.hgae = HgaeParams{std::move(l1), std::move(l2)};
        ckpt.hgae.check_consistent();
    } else if (ckpt.kind == "gae") {
        ckpt.gae = std::move(l1);
    } else {
        throw ContainerError("unknown model kind: " + ckpt.kind);
    }
    return ckpt;
}

} // namespace relseq
