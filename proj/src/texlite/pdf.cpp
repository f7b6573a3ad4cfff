#include "internal.hpp"

#include "manualkit/core/error.hpp"

#include <zlib.h>

#include <cstdio>
#include <regex>
#include <sstream>

namespace manualkit::texlite {

namespace {

std::string deflate(const std::string& data) {
  uLongf len = compressBound(static_cast<uLong>(data.size()));
  std::string out(len, '\0');
  if (compress2(reinterpret_cast<Bytef*>(out.data()), &len, reinterpret_cast<const Bytef*>(data.data()),
                static_cast<uLong>(data.size()), 6) != Z_OK) {
    throw std::runtime_error("zlib compression failed");
  }
  out.resize(len);
  return out;
}

std::optional<std::string> inflate_stream(const std::string& data) {
  z_stream zs{};
  if (inflateInit(&zs) != Z_OK) return std::nullopt;
  zs.next_in = reinterpret_cast<Bytef*>(const_cast<char*>(data.data()));
  zs.avail_in = static_cast<uInt>(data.size());
  std::string out;
  char buf[16384];
  int rc = Z_OK;
  while (rc == Z_OK) {
    zs.next_out = reinterpret_cast<Bytef*>(buf);
    zs.avail_out = sizeof(buf);
    rc = inflate(&zs, Z_NO_FLUSH);
    out.append(buf, sizeof(buf) - zs.avail_out);
  }
  inflateEnd(&zs);
  if (rc != Z_STREAM_END) return std::nullopt;
  return out;
}

std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", v);
  return buf;
}

std::string pdf_string(const std::string& bytes) {
  std::string out = "(";
  for (char c : bytes) {
    if (c == '(' || c == ')' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out + ")";
}

int font_index(const detail::Style& s) { return 1 + (s.bold ? 1 : 0) + (s.italic ? 2 : 0); }

}  // namespace

namespace detail {

std::string write_pdf(const Document& doc) {
  std::vector<std::string> objects;  // body of object i+1
  const std::size_t n_pages = doc.pages.size();
  const std::size_t n_images = doc.images.size();
  // 1 catalog, 2 pages, 3..6 fonts, then images, then (page, content) pairs.
  const std::size_t first_image = 7;
  const std::size_t first_page = first_image + n_images;
  objects.resize(first_page - 1 + 2 * n_pages);

  objects[0] = "<< /Type /Catalog /Pages 2 0 R >>";
  std::string kids;
  for (std::size_t i = 0; i < n_pages; ++i) kids += std::to_string(first_page + 2 * i) + " 0 R ";
  objects[1] = "<< /Type /Pages /Kids [ " + kids + "] /Count " + std::to_string(n_pages) + " >>";
  const char* fonts[] = {"Courier", "Courier-Bold", "Courier-Oblique", "Courier-BoldOblique"};
  for (int f = 0; f < 4; ++f) {
    objects[2 + f] = std::string("<< /Type /Font /Subtype /Type1 /BaseFont /") + fonts[f] +
                     " /Encoding /WinAnsiEncoding >>";
  }
  std::vector<std::string> streams(objects.size());
  for (std::size_t i = 0; i < n_images; ++i) {
    const cv::Mat& img = doc.images[i];
    std::string rgb;
    rgb.reserve(img.total() * 3);
    for (int y = 0; y < img.rows; ++y) {
      const cv::Vec3b* row = img.ptr<cv::Vec3b>(y);
      for (int x = 0; x < img.cols; ++x) {
        rgb.push_back(static_cast<char>(row[x][2]));
        rgb.push_back(static_cast<char>(row[x][1]));
        rgb.push_back(static_cast<char>(row[x][0]));
      }
    }
    std::string data = deflate(rgb);
    objects[first_image - 1 + i] = "<< /Type /XObject /Subtype /Image /Width " + std::to_string(img.cols) +
                                   " /Height " + std::to_string(img.rows) +
                                   " /ColorSpace /DeviceRGB /BitsPerComponent 8 /Filter /FlateDecode /Length " +
                                   std::to_string(data.size()) + " >>";
    streams[first_image - 1 + i] = std::move(data);
  }
  std::string xobjects;
  for (std::size_t i = 0; i < n_images; ++i) {
    xobjects += "/Im" + std::to_string(i) + " " + std::to_string(first_image + i) + " 0 R ";
  }
  const double H = doc.geometry.height;
  for (std::size_t p = 0; p < n_pages; ++p) {
    const Page& page = doc.pages[p];
    std::ostringstream cs;
    for (const auto& im : page.images) {
      cs << "q " << num(im.w) << " 0 0 " << num(im.h) << " " << num(im.x) << " " << num(H - im.y - im.h) << " cm /Im"
         << im.image << " Do Q\n";
    }
    for (const auto& l : page.lines) {
      cs << num(l.width) << " w 0 G " << num(l.x1) << " " << num(H - l.y1) << " m " << num(l.x2) << " "
         << num(H - l.y2) << " l S\n";
    }
    for (const auto& t : page.texts) {
      cs << "BT /F" << font_index(t.style) << " " << num(t.style.size) << " Tf " << num(t.style.color[0]) << " "
         << num(t.style.color[1]) << " " << num(t.style.color[2]) << " rg " << num(t.x) << " " << num(H - t.baseline)
         << " Td " << pdf_string(to_winansi(t.text)) << " Tj ET\n";
    }
    std::string content = deflate(cs.str());
    const std::size_t page_obj = first_page + 2 * p;
    objects[page_obj - 1] = "<< /Type /Page /Parent 2 0 R /MediaBox [0 0 " + num(doc.geometry.width) + " " + num(H) +
                            "] /Resources << /Font << /F1 3 0 R /F2 4 0 R /F3 5 0 R /F4 6 0 R >> /XObject << " +
                            xobjects + ">> >> /Contents " + std::to_string(page_obj + 1) + " 0 R >>";
    objects[page_obj] = "<< /Filter /FlateDecode /Length " + std::to_string(content.size()) + " >>";
    streams[page_obj] = std::move(content);
  }

  std::string out = "%PDF-1.4\n%\xE2\xE3\xCF\xD3\n";
  std::vector<std::size_t> offsets;
  for (std::size_t i = 0; i < objects.size(); ++i) {
    offsets.push_back(out.size());
    out += std::to_string(i + 1) + " 0 obj\n" + objects[i] + "\n";
    if (!streams[i].empty()) out += "stream\n" + streams[i] + "\nendstream\n";
    out += "endobj\n";
  }
  const std::size_t xref = out.size();
  out += "xref\n0 " + std::to_string(objects.size() + 1) + "\n0000000000 65535 f \n";
  for (std::size_t off : offsets) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "%010zu 00000 n \n", off);
    out += buf;
  }
  out += "trailer\n<< /Size " + std::to_string(objects.size() + 1) + " /Root 1 0 R >>\nstartxref\n" +
         std::to_string(xref) + "\n%%EOF\n";
  return out;
}

}  // namespace detail

int count_pdf_pages(const std::string& pdf) {
  if (pdf.compare(0, 5, "%PDF-") != 0) throw Error(Errc::unreadable_pdf, "missing %PDF header");
  static const std::regex page_re(R"(/Type\s*/Page(?![A-Za-z]))");
  auto count_in = [](const std::string& s) {
    return static_cast<int>(std::distance(std::sregex_iterator(s.begin(), s.end(), page_re), std::sregex_iterator()));
  };
  int pages = count_in(pdf);
  // Page dictionaries may sit inside compressed object streams.
  std::size_t pos = 0;
  while ((pos = pdf.find("stream", pos)) != std::string::npos) {
    if (pos >= 3 && pdf.compare(pos - 3, 3, "end") == 0) {
      pos += 6;
      continue;
    }
    std::size_t start = pos + 6;
    if (start < pdf.size() && pdf[start] == '\r') ++start;
    if (start < pdf.size() && pdf[start] == '\n') ++start;
    const std::size_t end = pdf.find("endstream", start);
    if (end == std::string::npos) break;
    const std::size_t dict = pdf.rfind("obj", pos);
    const std::string header = pdf.substr(dict == std::string::npos ? 0 : dict, pos - (dict == std::string::npos ? 0 : dict));
    if (header.find("/ObjStm") != std::string::npos) {
      if (auto body = inflate_stream(pdf.substr(start, end - start))) pages += count_in(*body);
    }
    pos = end + 9;
  }
  if (pages == 0 && pdf.find("%%EOF") == std::string::npos) throw Error(Errc::unreadable_pdf, "truncated PDF");
  return pages;
}

nlohmann::json to_json(const Layout& l) {
  nlohmann::json j;
  j["pages"] = l.pages;
  j["page_width"] = l.page_width;
  j["page_height"] = l.page_height;
  j["lines"] = nlohmann::json::array();
  for (const auto& t : l.lines) {
    j["lines"].push_back({{"page", t.page}, {"bbox", {t.x, t.y, t.width, t.height}}, {"text", t.text},
                          {"font_size", t.font_size}, {"bold", t.bold}});
  }
  j["images"] = nlohmann::json::array();
  for (const auto& im : l.images) {
    j["images"].push_back({{"page", im.page}, {"bbox", {im.x, im.y, im.width, im.height}}, {"path", im.path}});
  }
  j["tables"] = nlohmann::json::array();
  for (const auto& t : l.tables) {
    j["tables"].push_back({{"page", t.page}, {"bbox", {t.x, t.y, t.width, t.height}}});
  }
  return j;
}

Layout layout_from_json(const nlohmann::json& j) {
  try {
    Layout l;
    l.pages = j.at("pages").get<int>();
    l.page_width = j.value("page_width", 0.0);
    l.page_height = j.value("page_height", 0.0);
    for (const auto& t : j.at("lines")) {
      const auto& b = t.at("bbox");
      l.lines.push_back({t.at("page").get<int>(), b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                         b.at(3).get<double>(), t.at("text").get<std::string>(), t.value("font_size", 10.0),
                         t.value("bold", false)});
    }
    for (const auto& im : j.at("images")) {
      const auto& b = im.at("bbox");
      l.images.push_back({im.at("page").get<int>(), b.at(0).get<double>(), b.at(1).get<double>(),
                          b.at(2).get<double>(), b.at(3).get<double>(), im.at("path").get<std::string>()});
    }
    for (const auto& t : j.value("tables", nlohmann::json::array())) {
      const auto& b = t.at("bbox");
      l.tables.push_back({t.at("page").get<int>(), b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(),
                          b.at(3).get<double>()});
    }
    return l;
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::malformed_document, std::string("layout: ") + e.what());
  }
}

}  // namespace manualkit::texlite
