// Copyright (c) 2026 av2v contributors
// SPDX-License-Identifier: Apache-2.0

#include "av2v/media_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "av2v/rng.hpp"

namespace fs = std::filesystem;

namespace av2v {

namespace {

constexpr char kMagic[4] = {'A', 'V', '2', 'V'};
constexpr std::uint32_t kFormatVersion = 1;

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
  out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
}

void put_f64(std::vector<std::uint8_t>& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, sizeof(bits));
  for (int i = 0; i < 8; ++i) {
    out.push_back(static_cast<std::uint8_t>((bits >> (8 * i)) & 0xff));
  }
}

std::uint32_t take_u32(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + 4 > in.size()) throw FormatError("tensor data truncated in header");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in[pos + i]) << (8 * i);
  pos += 4;
  return v;
}

double take_f64(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  std::uint64_t bits = 0;
  for (int i = 0; i < 8; ++i) bits |= static_cast<std::uint64_t>(in[pos + i]) << (8 * i);
  pos += 8;
  double v;
  std::memcpy(&v, &bits, sizeof(v));
  return v;
}

}  // namespace

// ---- patch codec ------------------------------------------------------------

PatchCodec::PatchCodec(int patch, std::uint64_t seed) : patch_(patch) {
  if (patch < 1) throw ConfigError("patch size must be >= 1");
  latent_channels_ = 3 * patch * patch;
  const std::size_t n = static_cast<std::size_t>(latent_channels_);

  // Seeded gaussian matrix orthonormalized column by column (modified
  // Gram-Schmidt); deterministic for a given (patch, seed).
  SeededRng rng(seed ^ 0x9e3779b97f4a7c15ull);
  Tensor m({n, n});
  for (std::size_t i = 0; i < n * n; ++i) m[i] = static_cast<real>(rng.gaussian());
  for (std::size_t c = 0; c < n; ++c) {
    for (std::size_t prev = 0; prev < c; ++prev) {
      double dot = 0.0;
      for (std::size_t i = 0; i < n; ++i) dot += static_cast<double>(m.at(i, c)) * m.at(i, prev);
      for (std::size_t i = 0; i < n; ++i) {
        m.at(i, c) = static_cast<real>(m.at(i, c) - dot * m.at(i, prev));
      }
    }
    double norm = 0.0;
    for (std::size_t i = 0; i < n; ++i) norm += static_cast<double>(m.at(i, c)) * m.at(i, c);
    norm = std::sqrt(norm);
    const double inv = 1.0 / norm;
    for (std::size_t i = 0; i < n; ++i) m.at(i, c) = static_cast<real>(m.at(i, c) * inv);
  }
  projection_ = std::move(m);
}

Tensor PatchCodec::encode_frame(const Tensor& frame) const {
  if (frame.rank() != 3 || frame.dim(0) != 3) {
    throw FormatError("frame must be [3,H,W], got " + frame.shape_string());
  }
  const std::size_t hpx = frame.dim(1), wpx = frame.dim(2);
  const std::size_t p = static_cast<std::size_t>(patch_);
  if (hpx % p != 0 || wpx % p != 0) {
    throw FormatError("frame " + frame.shape_string() + " not divisible by patch size " +
                      std::to_string(patch_));
  }
  const std::size_t h = hpx / p, w = wpx / p;
  const std::size_t n = static_cast<std::size_t>(latent_channels_);
  Tensor latent({n, h, w});
  std::vector<double> v(n);
  for (std::size_t py = 0; py < h; ++py) {
    for (std::size_t px = 0; px < w; ++px) {
      std::size_t idx = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < p; ++y) {
          for (std::size_t x = 0; x < p; ++x) {
            v[idx++] = frame.at(c, py * p + y, px * p + x);
          }
        }
      }
      // z = P^T v
      for (std::size_t c = 0; c < n; ++c) {
        double acc = 0.0;
        for (std::size_t i = 0; i < n; ++i) acc += static_cast<double>(projection_.at(i, c)) * v[i];
        latent.at(c, py, px) = static_cast<real>(acc);
      }
    }
  }
  return latent;
}

Tensor PatchCodec::decode_frame(const Tensor& latent) const {
  if (latent.rank() != 3 || latent.dim(0) != static_cast<std::size_t>(latent_channels_)) {
    throw FormatError("latent channel count " +
                      (latent.rank() == 3 ? std::to_string(latent.dim(0)) : latent.shape_string()) +
                      " does not match codec channels " + std::to_string(latent_channels_));
  }
  const std::size_t h = latent.dim(1), w = latent.dim(2);
  const std::size_t p = static_cast<std::size_t>(patch_);
  const std::size_t n = static_cast<std::size_t>(latent_channels_);
  Tensor frame({3, h * p, w * p});
  std::vector<double> v(n);
  for (std::size_t py = 0; py < h; ++py) {
    for (std::size_t px = 0; px < w; ++px) {
      // v = P z
      for (std::size_t i = 0; i < n; ++i) {
        double acc = 0.0;
        for (std::size_t c = 0; c < n; ++c) {
          acc += static_cast<double>(projection_.at(i, c)) * latent.at(c, py, px);
        }
        v[i] = acc;
      }
      std::size_t idx = 0;
      for (std::size_t c = 0; c < 3; ++c) {
        for (std::size_t y = 0; y < p; ++y) {
          for (std::size_t x = 0; x < p; ++x) {
            frame.at(c, py * p + y, px * p + x) = static_cast<real>(v[idx++]);
          }
        }
      }
    }
  }
  return frame;
}

VideoLatent PatchCodec::encode_video(const FrameSequence& fseq) const {
  if (fseq.frames.empty()) throw FormatError("cannot encode an empty frame sequence");
  std::vector<Tensor> latents;
  latents.reserve(fseq.frames.size());
  for (const Tensor& f : fseq.frames) {
    if (!f.same_shape(fseq.frames.front())) {
      throw FormatError("frames disagree on dimensions: " + f.shape_string() + " vs " +
                        fseq.frames.front().shape_string());
    }
    latents.push_back(encode_frame(f));
  }
  const Tensor& first = latents.front();
  VideoLatent z({latents.size(), first.dim(0), first.dim(1), first.dim(2)});
  const std::size_t per_frame = first.size();
  for (std::size_t i = 0; i < latents.size(); ++i) {
    std::memcpy(z.data() + i * per_frame, latents[i].data(), per_frame * sizeof(real));
  }
  return z;
}

FrameSequence PatchCodec::decode_video(const VideoLatent& z) const {
  if (z.rank() != 4) throw FormatError("video latent must be rank 4, got " + z.shape_string());
  FrameSequence fseq;
  const std::size_t per_frame = z.dim(1) * z.dim(2) * z.dim(3);
  for (std::size_t i = 0; i < z.dim(0); ++i) {
    Tensor latent({z.dim(1), z.dim(2), z.dim(3)});
    std::memcpy(latent.data(), z.data() + i * per_frame, per_frame * sizeof(real));
    fseq.frames.push_back(decode_frame(latent));
  }
  return fseq;
}

// ---- tensor files ------------------------------------------------------------

std::vector<std::uint8_t> encode_tensor_bytes(const Tensor& t) {
  std::vector<std::uint8_t> out;
  out.reserve(16 + 4 * t.rank() + 8 * t.size());
  out.insert(out.end(), kMagic, kMagic + 4);
  put_u32(out, kFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (std::size_t d : t.dims()) put_u32(out, static_cast<std::uint32_t>(d));
  for (std::size_t i = 0; i < t.size(); ++i) put_f64(out, static_cast<double>(t[i]));
  return out;
}

Tensor decode_tensor_bytes(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw FormatError("bad magic: not a tensor file");
  }
  std::size_t pos = 4;
  const std::uint32_t version = take_u32(bytes, pos);
  if (version != kFormatVersion) {
    throw FormatError("unsupported tensor format version " + std::to_string(version));
  }
  const std::uint32_t rank = take_u32(bytes, pos);
  std::vector<std::size_t> dims(rank);
  std::size_t volume = 1;
  for (std::uint32_t i = 0; i < rank; ++i) {
    dims[i] = take_u32(bytes, pos);
    if (dims[i] == 0) throw FormatError("tensor extent 0 in file header");
    volume *= dims[i];
  }
  if (bytes.size() < pos + 8 * volume) {
    throw FormatError("tensor data truncated: payload ends early");
  }
  if (bytes.size() > pos + 8 * volume) {
    throw FormatError("tensor file has trailing bytes");
  }
  std::vector<real> data(volume);
  for (std::size_t i = 0; i < volume; ++i) data[i] = static_cast<real>(take_f64(bytes, pos));
  return Tensor(std::move(dims), std::move(data));
}

void write_tensor(const std::string& path, const Tensor& t) {
  const std::vector<std::uint8_t> bytes = encode_tensor_bytes(t);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("short write: " + path);
}

Tensor read_tensor(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                  std::istreambuf_iterator<char>());
  return decode_tensor_bytes(bytes);
}

// ---- pixmaps -----------------------------------------------------------------

namespace {

int ppm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int ch = in.get();
  while (ch != EOF) {
    if (ch == '#') {
      while (ch != EOF && ch != '\n') ch = in.get();
    } else if (std::isspace(ch)) {
      ch = in.get();
    } else {
      break;
    }
  }
  while (ch != EOF && !std::isspace(ch)) {
    tok.push_back(static_cast<char>(ch));
    ch = in.get();
  }
  return ch;
}

}  // namespace

Tensor read_ppm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  std::string tok;
  ppm_next_token(in, tok);
  if (tok != "P6") throw FormatError(path + ": not a P6 pixmap");
  ppm_next_token(in, tok);
  const long w = std::strtol(tok.c_str(), nullptr, 10);
  ppm_next_token(in, tok);
  const long h = std::strtol(tok.c_str(), nullptr, 10);
  ppm_next_token(in, tok);
  const long maxval = std::strtol(tok.c_str(), nullptr, 10);
  if (w <= 0 || h <= 0) throw FormatError(path + ": bad pixmap dimensions");
  if (maxval != 255) throw FormatError(path + ": maxval must be 255");

  const std::size_t count = static_cast<std::size_t>(w) * static_cast<std::size_t>(h) * 3;
  std::vector<std::uint8_t> raw(count);
  in.read(reinterpret_cast<char*>(raw.data()), static_cast<std::streamsize>(count));
  if (static_cast<std::size_t>(in.gcount()) != count) {
    throw FormatError(path + ": pixel data truncated");
  }

  Tensor frame({3, static_cast<std::size_t>(h), static_cast<std::size_t>(w)});
  std::size_t idx = 0;
  for (long y = 0; y < h; ++y) {
    for (long x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        frame.at(c, static_cast<std::size_t>(y), static_cast<std::size_t>(x)) =
            static_cast<real>(raw[idx++] / 255.0);
      }
    }
  }
  return frame;
}

void write_ppm(const std::string& path, const Tensor& frame) {
  if (frame.rank() != 3 || frame.dim(0) != 3) {
    throw FormatError("ppm frame must be [3,H,W], got " + frame.shape_string());
  }
  const std::size_t h = frame.dim(1), w = frame.dim(2);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P6\n" << w << ' ' << h << "\n255\n";
  std::vector<std::uint8_t> raw;
  raw.reserve(3 * h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t c = 0; c < 3; ++c) {
        const double v = std::clamp(static_cast<double>(frame.at(c, y, x)), 0.0, 1.0);
        raw.push_back(static_cast<std::uint8_t>(std::lround(v * 255.0)));
      }
    }
  }
  out.write(reinterpret_cast<const char*>(raw.data()), static_cast<std::streamsize>(raw.size()));
  if (!out) throw IoError("short write: " + path);
}

FrameSequence read_frames(const std::string& dir) {
  if (!fs::is_directory(dir)) throw IoError("not a directory: " + dir);
  std::vector<std::string> names;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".ppm") {
      names.push_back(entry.path().string());
    }
  }
  if (names.empty()) throw FormatError("no .ppm frames found in " + dir);
  std::sort(names.begin(), names.end());
  FrameSequence fseq;
  for (const std::string& name : names) {
    Tensor frame = read_ppm(name);
    if (!fseq.frames.empty() && !frame.same_shape(fseq.frames.front())) {
      throw FormatError(name + ": frame dimensions differ from earlier frames");
    }
    fseq.frames.push_back(std::move(frame));
  }
  return fseq;
}

void write_frames(const std::string& dir, const FrameSequence& fseq) {
  fs::create_directories(dir);
  char name[32];
  for (std::size_t i = 0; i < fseq.frames.size(); ++i) {
    std::snprintf(name, sizeof(name), "frame_%04zu.ppm", i);
    write_ppm((fs::path(dir) / name).string(), fseq.frames[i]);
  }
}

void write_pgm(const std::string& path, const Tensor& image) {
  if (image.rank() != 2) throw FormatError("pgm image must be [H,W], got " + image.shape_string());
  const std::size_t h = image.dim(0), w = image.dim(1);
  double lo = image[0], hi = image[0];
  for (std::size_t i = 0; i < image.size(); ++i) {
    lo = std::min(lo, static_cast<double>(image[i]));
    hi = std::max(hi, static_cast<double>(image[i]));
  }
  const double span = hi > lo ? hi - lo : 1.0;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "P5\n" << w << ' ' << h << "\n255\n";
  for (std::size_t i = 0; i < image.size(); ++i) {
    const double v = (static_cast<double>(image[i]) - lo) / span;
    out.put(static_cast<char>(static_cast<std::uint8_t>(std::lround(v * 255.0))));
  }
  if (!out) throw IoError("short write: " + path);
}

}  // namespace av2v
