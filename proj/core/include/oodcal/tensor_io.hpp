#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "oodcal/tensor.hpp"
#include "oodcal/types.hpp"

namespace oodcal {

namespace fs = std::filesystem;

// On-disk tensor: a directory holding header.json
//   {"shape":[...],"dtype":"float32","order":"row-major","endianness":"little"}
// and data.bin with the raw little-endian values. float64 is also accepted.
template <typename T>
struct LoadedTensor {
    Tensor<T> tensor;
    bool finite = true;  // false when the payload contains NaN or Inf
};

template <typename T>
void write_tensor(const fs::path& dir, const Tensor<T>& tensor);

// Reads either dtype and converts to T. Throws on malformed header or a
// payload whose size disagrees with the header. Non-finite values are loaded
// and reported through `finite`.
template <typename T>
LoadedTensor<T> load_tensor(const fs::path& dir);

template <typename T>
Tensor<T> read_tensor(const fs::path& dir) {
    return load_tensor<T>(dir).tensor;
}

// Case layout: <root>/<case_id>/image/<slice>/ and <root>/<case_id>/label/<slice>/,
// slice directories named by zero-padded index.
std::string slice_dir_name(int slice_index);
void write_case(const fs::path& root, const std::string& case_id,
                const std::vector<std::pair<ImageSlice, LabelMap>>& slices);
std::vector<std::pair<ImageSlice, LabelMap>> read_case(const fs::path& root, const std::string& case_id,
                                                       const std::string& image_subdir = "image");

}  // namespace oodcal
