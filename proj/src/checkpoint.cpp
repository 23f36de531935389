#include "sar/checkpoint.hpp"

#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

namespace sar {

namespace {

constexpr char kMagic[4] = {'S', 'A', 'R', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_u32(std::ostream& out, std::uint32_t v) {
  unsigned char b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 4);
}

void write_u64(std::ostream& out, std::uint64_t v) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>((v >> (8 * i)) & 0xff);
  out.write(reinterpret_cast<const char*>(b), 8);
}

void write_f64(std::ostream& out, double v) {
  std::uint64_t bits;
  std::memcpy(&bits, &v, 8);
  write_u64(out, bits);
}

std::uint32_t read_u32(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  if (!in) throw std::runtime_error("checkpoint truncated");
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
  return v;
}

std::uint64_t read_u64(std::istream& in) {
  unsigned char b[8];
  in.read(reinterpret_cast<char*>(b), 8);
  if (!in) throw std::runtime_error("checkpoint truncated");
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

double read_f64(std::istream& in) {
  const std::uint64_t bits = read_u64(in);
  double v;
  std::memcpy(&v, &bits, 8);
  return v;
}

void write_record(std::ostream& out, const std::string& name, const Tensor& t) {
  write_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  write_u32(out, static_cast<std::uint32_t>(t.rank()));
  for (long d : t.shape()) write_u64(out, static_cast<std::uint64_t>(d));
  for (long i = 0; i < t.size(); ++i) write_f64(out, t[i]);
}

void write_header(std::ostream& out) {
  out.write(kMagic, 4);
  write_u32(out, kVersion);
}

void read_header(std::istream& in, const std::string& path) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0)
    throw std::runtime_error("not a SARM checkpoint: " + path);
  const std::uint32_t version = read_u32(in);
  if (version != kVersion)
    throw std::runtime_error("unsupported checkpoint version in " + path);
}

// Returns false at a clean end-of-file.
bool read_record(std::istream& in, std::string& name, Tensor& t) {
  char probe;
  if (!in.get(probe)) return false;
  in.unget();
  const std::uint32_t name_len = read_u32(in);
  name.resize(name_len);
  in.read(name.data(), name_len);
  if (!in) throw std::runtime_error("checkpoint truncated");
  const std::uint32_t rank = read_u32(in);
  std::vector<long> shape(rank);
  for (std::uint32_t i = 0; i < rank; ++i) shape[i] = static_cast<long>(read_u64(in));
  t = Tensor(shape);
  for (long i = 0; i < t.size(); ++i) t[i] = read_f64(in);
  return true;
}

}  // namespace

void save_params(const ParamStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  write_header(out);
  for (const auto& [name, p] : store.params()) write_record(out, name, p.value);
}

ParamStore load_params(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint: " + path);
  read_header(in, path);
  ParamStore store;
  std::string name;
  Tensor t;
  while (read_record(in, name, t)) {
    Tensor& dst = store.create(name, t.shape());
    dst = t;
  }
  return store;
}

void save_optimizer_state(const ParamStore& store, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write optimizer state: " + path);
  write_header(out);
  Tensor step({1});
  step[0] = static_cast<double>(store.step());
  write_record(out, "__step__", step);
  for (const auto& [name, p] : store.params()) {
    write_record(out, name + ".m", p.m);
    write_record(out, name + ".v", p.v);
  }
}

void load_optimizer_state(ParamStore& store, const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open optimizer state: " + path);
  read_header(in, path);
  std::string name;
  Tensor t;
  while (read_record(in, name, t)) {
    if (name == "__step__") {
      store.set_step(static_cast<long>(t[0]));
    } else if (name.size() > 2 && name.substr(name.size() - 2) == ".m") {
      store.at(name.substr(0, name.size() - 2)).m = t;
    } else if (name.size() > 2 && name.substr(name.size() - 2) == ".v") {
      store.at(name.substr(0, name.size() - 2)).v = t;
    } else {
      throw std::runtime_error("unexpected optimizer record: " + name);
    }
  }
}

}  // namespace sar
