#include "manualkit/image/io.hpp"

#include "manualkit/core/error.hpp"

#include <openssl/evp.h>
#include <opencv2/imgcodecs.hpp>

#include <unistd.h>

#include <atomic>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace manualkit {

std::string sha256_hex(std::string_view bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int len = 0;
  EVP_MD_CTX* ctx = EVP_MD_CTX_new();
  EVP_DigestInit_ex(ctx, EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx, bytes.data(), bytes.size());
  EVP_DigestFinal_ex(ctx, digest, &len);
  EVP_MD_CTX_free(ctx);
  std::string out;
  char buf[3];
  for (unsigned int i = 0; i < len; ++i) {
    std::snprintf(buf, sizeof buf, "%02x", digest[i]);
    out += buf;
  }
  return out;
}

std::vector<unsigned char> encode_png(const cv::Mat& image) {
  std::vector<unsigned char> out;
  if (image.empty() || !cv::imencode(".png", image, out, {cv::IMWRITE_PNG_COMPRESSION, 6})) {
    throw Error(Errc::precondition_violated, "cannot encode PNG");
  }
  return out;
}

cv::Mat read_image(const std::filesystem::path& path) {
  cv::Mat img = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (img.empty()) throw Error(Errc::dataset_asset_missing, "cannot read image " + path.string());
  return img;
}

std::string write_content_addressed(const std::filesystem::path& dir, std::string_view bytes, std::string_view ext) {
  std::filesystem::create_directories(dir);
  const std::string name = sha256_hex(bytes).substr(0, 24) + std::string(ext);
  const auto path = dir / name;
  if (!std::filesystem::exists(path)) write_text_file(path, bytes);
  return name;
}

std::string write_png_asset(const std::filesystem::path& dir, const cv::Mat& image) {
  const auto png = encode_png(image);
  return write_content_addressed(dir, std::string_view(reinterpret_cast<const char*>(png.data()), png.size()), ".png");
}

void write_text_file(const std::filesystem::path& path, std::string_view content) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  static std::atomic<unsigned> counter{0};
  auto tmp = path;
  tmp += "." + std::to_string(::getpid()) + "." + std::to_string(counter++) + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::dataset_asset_missing, "cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(Errc::dataset_asset_missing, "short write to " + path.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::dataset_asset_missing, "cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace manualkit
