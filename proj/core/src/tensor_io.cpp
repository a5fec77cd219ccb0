#include "oodcal/tensor_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iomanip>
#include <sstream>

#include <nlohmann/json.hpp>

namespace oodcal {

static_assert(std::endian::native == std::endian::little, "tensor files assume a little-endian host");

namespace {

template <typename T>
constexpr const char* dtype_name();
template <>
constexpr const char* dtype_name<float>() { return "float32"; }
template <>
constexpr const char* dtype_name<double>() { return "float64"; }

template <typename Src, typename Dst>
void convert_payload(const std::string& bytes, std::vector<Dst>& out) {
    const std::size_t n = bytes.size() / sizeof(Src);
    out.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        Src v;
        std::memcpy(&v, bytes.data() + i * sizeof(Src), sizeof(Src));
        out[i] = static_cast<Dst>(v);
    }
}

}  // namespace

template <typename T>
void write_tensor(const fs::path& dir, const Tensor<T>& tensor) {
    fs::create_directories(dir);
    nlohmann::json header = {
        {"shape", tensor.shape()},
        {"dtype", dtype_name<T>()},
        {"order", "row-major"},
        {"endianness", "little"},
    };
    {
        std::ofstream h(dir / "header.json");
        require(static_cast<bool>(h), "write_tensor: cannot open " + (dir / "header.json").string());
        h << header.dump() << "\n";
    }
    std::ofstream d(dir / "data.bin", std::ios::binary);
    require(static_cast<bool>(d), "write_tensor: cannot open " + (dir / "data.bin").string());
    d.write(reinterpret_cast<const char*>(tensor.data()), static_cast<std::streamsize>(tensor.size() * sizeof(T)));
    require(static_cast<bool>(d), "write_tensor: write failed for " + dir.string());
}

template <typename T>
LoadedTensor<T> load_tensor(const fs::path& dir) {
    std::ifstream h(dir / "header.json");
    require(static_cast<bool>(h), "read_tensor: missing header.json in " + dir.string());
    nlohmann::json header;
    try {
        h >> header;
    } catch (const nlohmann::json::exception& e) {
        throw Error("read_tensor: malformed header in " + dir.string() + ": " + e.what());
    }
    require(header.contains("shape") && header["shape"].is_array(), "read_tensor: header lacks shape");
    const std::string dtype = header.value("dtype", "");
    require(dtype == "float32" || dtype == "float64", "read_tensor: unsupported dtype '" + dtype + "'");
    require(header.value("order", "row-major") == "row-major", "read_tensor: only row-major order is supported");
    require(header.value("endianness", "little") == "little", "read_tensor: only little-endian payloads are supported");
    std::vector<std::size_t> shape = header["shape"].get<std::vector<std::size_t>>();

    std::ifstream d(dir / "data.bin", std::ios::binary);
    require(static_cast<bool>(d), "read_tensor: missing data.bin in " + dir.string());
    std::ostringstream buf;
    buf << d.rdbuf();
    const std::string bytes = buf.str();

    const std::size_t elem = dtype == "float32" ? sizeof(float) : sizeof(double);
    const std::size_t expected = Tensor<T>::count(shape);
    require(bytes.size() == expected * elem,
            "read_tensor: payload size mismatch in " + dir.string() + " (header " + shape_string(shape) +
                " expects " + std::to_string(expected) + " values, payload holds " +
                std::to_string(bytes.size() / elem) + ")");

    std::vector<T> values;
    if (dtype == "float32") {
        convert_payload<float>(bytes, values);
    } else {
        convert_payload<double>(bytes, values);
    }
    LoadedTensor<T> out{Tensor<T>(std::move(shape), std::move(values)), true};
    out.finite = out.tensor.all_finite();
    return out;
}

template void write_tensor<float>(const fs::path&, const Tensor<float>&);
template void write_tensor<double>(const fs::path&, const Tensor<double>&);
template LoadedTensor<float> load_tensor<float>(const fs::path&);
template LoadedTensor<double> load_tensor<double>(const fs::path&);

std::string slice_dir_name(int slice_index) {
    std::ostringstream s;
    s << std::setw(3) << std::setfill('0') << slice_index;
    return s.str();
}

void write_case(const fs::path& root, const std::string& case_id,
                const std::vector<std::pair<ImageSlice, LabelMap>>& slices) {
    for (const auto& [image, label] : slices) {
        const std::string name = slice_dir_name(image.slice_index());
        write_tensor(root / case_id / "image" / name, image.data());
        write_tensor(root / case_id / "label" / name, label.data());
    }
}

std::vector<std::pair<ImageSlice, LabelMap>> read_case(const fs::path& root, const std::string& case_id,
                                                       const std::string& image_subdir) {
    const fs::path image_root = root / case_id / image_subdir;
    require(fs::is_directory(image_root), "read_case: missing " + image_root.string());
    std::vector<std::string> names;
    for (const auto& entry : fs::directory_iterator(image_root)) {
        if (entry.is_directory()) names.push_back(entry.path().filename().string());
    }
    std::sort(names.begin(), names.end());
    std::vector<std::pair<ImageSlice, LabelMap>> out;
    for (const auto& name : names) {
        TensorF image = read_tensor<float>(image_root / name);
        TensorF label = read_tensor<float>(root / case_id / "label" / name);
        out.emplace_back(ImageSlice(std::move(image), case_id, std::stoi(name)), LabelMap(std::move(label)));
    }
    return out;
}

}  // namespace oodcal
