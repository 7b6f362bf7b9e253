#include <catch2/catch_amalgamated.hpp>

#include <cstdint>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "batle/mnist_idx.hpp"

using namespace batle;

namespace {

void put_be_u32(std::vector<std::uint8_t>& buf, std::uint32_t v) {
    buf.push_back(static_cast<std::uint8_t>(v >> 24));
    buf.push_back(static_cast<std::uint8_t>(v >> 16));
    buf.push_back(static_cast<std::uint8_t>(v >> 8));
    buf.push_back(static_cast<std::uint8_t>(v));
}

std::string write_temp(const std::string& name, const std::vector<std::uint8_t>& bytes) {
    const std::string path = "/tmp/batle_idx_" + name;
    std::ofstream out(path, std::ios::binary);
    out.write(reinterpret_cast<const char*>(bytes.data()),
              static_cast<std::streamsize>(bytes.size()));
    return path;
}

}  // namespace

TEST_CASE("a header declaring zero items yields an empty set") {
    std::vector<std::uint8_t> img, lab;
    put_be_u32(img, kIdxImageMagic);
    put_be_u32(img, 0);
    put_be_u32(img, 28);
    put_be_u32(img, 28);
    put_be_u32(lab, kIdxLabelMagic);
    put_be_u32(lab, 0);
    const auto ip = write_temp("empty_img", img);
    const auto lp = write_temp("empty_lab", lab);
    const ImageSet set = load_idx(ip, lp);
    REQUIRE(set.count == 0);
    REQUIRE(set.pixels.empty());
    REQUIRE(set.labels.empty());
    std::remove(ip.c_str());
    std::remove(lp.c_str());
}

TEST_CASE("corrupted magic is reported with expected vs found") {
    std::vector<std::uint8_t> img;
    put_be_u32(img, 0xDEADBEEF);
    put_be_u32(img, 0);
    put_be_u32(img, 28);
    put_be_u32(img, 28);
    const auto ip = write_temp("bad_magic", img);
    ImageSet set;
    REQUIRE_THROWS_WITH(load_idx_images(ip, set),
                        Catch::Matchers::ContainsSubstring("0x803") &&
                            Catch::Matchers::ContainsSubstring("deadbeef"));
    std::remove(ip.c_str());
}

TEST_CASE("hand-crafted one-image fixture parses to the exact bytes") {
    std::vector<std::uint8_t> img, lab;
    put_be_u32(img, kIdxImageMagic);
    put_be_u32(img, 1);
    put_be_u32(img, 28);
    put_be_u32(img, 28);
    std::vector<std::uint8_t> pixels(28 * 28);
    for (std::size_t i = 0; i < pixels.size(); ++i)
        pixels[i] = static_cast<std::uint8_t>((i * 7 + 3) % 256);
    img.insert(img.end(), pixels.begin(), pixels.end());
    put_be_u32(lab, kIdxLabelMagic);
    put_be_u32(lab, 1);
    lab.push_back(7);

    const auto ip = write_temp("one_img", img);
    const auto lp = write_temp("one_lab", lab);
    const ImageSet set = load_idx(ip, lp);
    REQUIRE(set.count == 1);
    REQUIRE(set.rows == 28);
    REQUIRE(set.cols == 28);
    REQUIRE(set.pixels == pixels);
    REQUIRE(set.labels == std::vector<std::uint8_t>{7});
    std::remove(ip.c_str());
    std::remove(lp.c_str());
}

TEST_CASE("truncated payload is a length error") {
    std::vector<std::uint8_t> img;
    put_be_u32(img, kIdxImageMagic);
    put_be_u32(img, 2);
    put_be_u32(img, 28);
    put_be_u32(img, 28);
    img.resize(img.size() + 100);  // far fewer than 2*784 bytes
    const auto ip = write_temp("trunc", img);
    ImageSet set;
    REQUIRE_THROWS_WITH(load_idx_images(ip, set),
                        Catch::Matchers::ContainsSubstring("truncated"));
    std::remove(ip.c_str());
}

TEST_CASE("image/label count mismatch is rejected") {
    std::vector<std::uint8_t> img, lab;
    put_be_u32(img, kIdxImageMagic);
    put_be_u32(img, 1);
    put_be_u32(img, 2);
    put_be_u32(img, 2);
    img.insert(img.end(), {1, 2, 3, 4});
    put_be_u32(lab, kIdxLabelMagic);
    put_be_u32(lab, 2);
    lab.push_back(0);
    lab.push_back(1);
    const auto ip = write_temp("mismatch_img", img);
    const auto lp = write_temp("mismatch_lab", lab);
    REQUIRE_THROWS_WITH(load_idx(ip, lp), Catch::Matchers::ContainsSubstring("does not match"));
    std::remove(ip.c_str());
    std::remove(lp.c_str());
}
