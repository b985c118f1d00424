#include "strav/image_io.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

namespace strav {

namespace {

// Reads one whitespace/comment-delimited token of a PNM header.
std::string next_token(std::istream& in) {
  std::string tok;
  while (in) {
    const int c = in.get();
    if (c == EOF) break;
    if (c == '#') {
      std::string skip;
      std::getline(in, skip);
      continue;
    }
    if (std::isspace(c)) {
      if (!tok.empty()) break;
      continue;
    }
    tok.push_back(static_cast<char>(c));
  }
  return tok;
}

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0, maxval = 0;
};

PnmHeader read_header(std::istream& in, const std::filesystem::path& file) {
  PnmHeader h;
  h.magic = next_token(in);
  try {
    h.width = std::stoi(next_token(in));
    h.height = std::stoi(next_token(in));
    h.maxval = std::stoi(next_token(in));
  } catch (const std::exception&) {
    throw std::runtime_error("malformed header in " + file.string());
  }
  if (h.width <= 0 || h.height <= 0 || h.maxval != 255)
    throw std::runtime_error("unsupported image (need 8-bit): " + file.string());
  return h;
}

}  // namespace

Frame read_frame(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open frame file: " + file.string());
  const PnmHeader h = read_header(in, file);
  if (h.magic != "P6") throw std::runtime_error("expected P6 ppm: " + file.string());

  std::vector<unsigned char> raw(static_cast<std::size_t>(h.width) * h.height * 3);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw std::runtime_error("truncated frame file: " + file.string());

  Frame f(h.height, h.width);
  for (std::size_t i = 0; i < raw.size(); ++i)
    f.data()[i] = static_cast<float>(raw[i]) / 255.0f;
  return f;
}

void write_frame(const std::filesystem::path& file, const Frame& f) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write frame file: " + file.string());
  out << "P6\n" << f.width() << " " << f.height() << "\n255\n";
  std::vector<unsigned char> raw(f.data().size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(to_byte(f.data()[i]));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("short write: " + file.string());
}

Mask read_mask(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open mask file: " + file.string());
  const PnmHeader h = read_header(in, file);
  if (h.magic != "P5") throw std::runtime_error("expected P5 pgm: " + file.string());

  std::vector<unsigned char> raw(static_cast<std::size_t>(h.width) * h.height);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (static_cast<std::size_t>(in.gcount()) != raw.size())
    throw std::runtime_error("truncated mask file: " + file.string());

  Mask m(h.height, h.width);
  for (std::size_t i = 0; i < raw.size(); ++i)
    m.data()[i] = raw[i] > 0 ? 1.0f : 0.0f;
  return m;
}

void write_mask(const std::filesystem::path& file, const Mask& m) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write mask file: " + file.string());
  out << "P5\n" << m.width() << " " << m.height() << "\n255\n";
  std::vector<unsigned char> raw(m.data().size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = m.data()[i] > 0.0f ? 255 : 0;
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("short write: " + file.string());
}

void write_gray(const std::filesystem::path& file, const Mask& m) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write gray file: " + file.string());
  out << "P5\n" << m.width() << " " << m.height() << "\n255\n";
  std::vector<unsigned char> raw(m.data().size());
  for (std::size_t i = 0; i < raw.size(); ++i)
    raw[i] = static_cast<unsigned char>(to_byte(m.data()[i]));
  out.write(reinterpret_cast<const char*>(raw.data()),
            static_cast<std::streamsize>(raw.size()));
  if (!out) throw std::runtime_error("short write: " + file.string());
}

Frame quantize8(const Frame& f) {
  Frame out(f.height(), f.width());
  for (std::size_t i = 0; i < f.data().size(); ++i)
    out.data()[i] = static_cast<float>(to_byte(f.data()[i])) / 255.0f;
  return out;
}

std::vector<std::string> list_stems(const std::filesystem::path& dir,
                                    const std::string& extension) {
  if (!std::filesystem::is_directory(dir))
    throw std::runtime_error("not a directory: " + dir.string());
  std::vector<std::string> stems;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (!entry.is_regular_file()) continue;
    if (entry.path().extension() == extension)
      stems.push_back(entry.path().stem().string());
  }
  std::sort(stems.begin(), stems.end());
  return stems;
}

}  // namespace strav
