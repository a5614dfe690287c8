#pragma once

#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <unistd.h>
#include <string>
#include <vector>

#include "goldspot/dataset.hpp"
#include "goldspot/image.hpp"
#include "goldspot/random.hpp"
#include "goldspot/synth.hpp"

namespace testing {

// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("goldspot_test_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

inline std::string slurp(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const std::filesystem::path& p, const std::string& bytes) {
    std::ofstream out(p, std::ios::binary);
    out << bytes;
}

inline goldspot::GrayImage random_image(std::size_t w, std::size_t h, std::uint64_t seed) {
    goldspot::Rng rng(seed);
    std::vector<double> data(w * h);
    for (auto& v : data) v = static_cast<double>(rng.below(256));
    return goldspot::GrayImage(w, h, std::move(data));
}

inline std::vector<goldspot::AnnotatedImage> synth_corpus(const goldspot::SynthSpec& spec, std::size_t n) {
    std::vector<goldspot::AnnotatedImage> out;
    auto images = goldspot::generate_corpus(spec, n);
    for (std::size_t i = 0; i < images.size(); ++i)
        out.push_back({"img" + std::to_string(i), std::move(images[i].image), std::move(images[i].annotations)});
    return out;
}

}  // namespace testing
