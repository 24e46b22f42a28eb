#include "pforest/jsonl.hpp"

#include <fstream>
#include <sstream>

#include "pforest/errors.hpp"

namespace pforest {

void for_each_jsonl(const std::string& path,
                    const std::function<void(size_t, const json&)>& fn) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::string line;
  size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    json obj = json::parse(line, nullptr, false);
    if (obj.is_discarded())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": malformed JSON");
    if (!obj.is_object())
      throw ValidationError(path + ":" + std::to_string(lineno) + ": expected a JSON object");
    fn(lineno, obj);
  }
}

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot open " + path + " for writing");
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) throw ValidationError("short write to " + path);
}

std::string fnv1a64_hex(std::string_view bytes) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  static const char* digits = "0123456789abcdef";
  std::string out(16, '0');
  for (int i = 15; i >= 0; --i) {
    out[static_cast<size_t>(i)] = digits[h & 0xf];
    h >>= 4;
  }
  return out;
}

std::string require_string(const json& obj, const char* key, const std::string& context) {
  auto it = obj.find(key);
  if (it == obj.end() || !it->is_string())
    throw ValidationError(context + ": missing string field \"" + key + "\"");
  return it->get<std::string>();
}

}  // namespace pforest
