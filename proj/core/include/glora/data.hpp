#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "glora/tensor.hpp"

namespace glora {

struct Dataset {
    Tensor images;  // [N, c, H, W], values in [0, 1] plus noise
    std::vector<int> labels;
    std::string name;
    std::string split;
    int num_classes = 0;

    std::size_t size() const { return labels.size(); }
    void validate() const;
};

// Oriented sinusoidal gratings, one orientation per class. Source and target
// share the class structure but differ in frequency band and a global
// orientation offset, giving the desk-scale distribution shift.
struct SynthSpec {
    enum class Mode { source, target };
    Mode mode = Mode::source;
    int num_classes = 8;
    int samples_per_class = 64;
    int image_size = 16;
    double sigma = 0.05;        // additive Gaussian pixel noise
    std::uint64_t seed = 1;

    // Shift parameters; filled from mode by defaults().
    double orientation_offset = 0.0;
    double freq_lo = 2.0;
    double freq_hi = 3.0;

    static SynthSpec defaults(Mode mode);
    void validate() const;
};

Dataset synth_generate(const SynthSpec& spec);

// IDX image/label files (magic 0x00000803 / 0x00000801, big-endian dims,
// u8 pixels scaled to [0,1]). labels_path defaults to the image path with
// "images"->"labels" and "idx3"->"idx1" substituted.
Dataset idx_load(const std::string& images_path, const std::string& labels_path = "");
void idx_save(const Dataset& ds, const std::string& images_path, const std::string& labels_path);

// URI forms:
//   synth:source?seed=1&split=train&k=8&n=64&size=16&sigma=0.05
//   synth:target?...
//   idx:path/to/images.idx3-ubyte[?labels=path/to/labels.idx1-ubyte]
// The split offsets the effective synth seed so train/val/test draws differ.
Dataset load_dataset(const std::string& uri);

}  // namespace glora
