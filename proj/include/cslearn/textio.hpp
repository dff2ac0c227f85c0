#pragma once

#include <map>
#include <string>
#include <vector>

namespace cslearn {

// Shortest decimal form that round-trips to the same double. All text output
// (net files, CSV, JSON numbers) goes through this so that reruns are
// byte-identical.
std::string format_double(double value);

// Parse helpers. All throw Error on malformed input; the *_at variants report
// a 1-based line number through ParseError.
double parse_double(const std::string& text);
double parse_double_at(const std::string& text, int line);
long parse_long_at(const std::string& text, int line);

std::string trim(const std::string& text);
std::vector<std::string> split(const std::string& text, char sep);
// Split on runs of whitespace; no empty fields.
std::vector<std::string> split_ws(const std::string& text);

// key=value configuration file: one pair per line, '#' starts a comment,
// blank lines ignored. Later keys override earlier ones.
class Config {
 public:
  Config() = default;
  static Config load(const std::string& path);
  static Config parse(const std::string& text);

  bool has(const std::string& key) const;
  std::string get(const std::string& key, const std::string& fallback) const;
  double get(const std::string& key, double fallback) const;
  long get(const std::string& key, long fallback) const;
  void set(const std::string& key, const std::string& value);

  const std::map<std::string, std::string>& entries() const { return entries_; }

 private:
  std::map<std::string, std::string> entries_;
};

// Whole-file IO.
std::string read_file(const std::string& path);
void write_file(const std::string& path, const std::string& content);

}  // namespace cslearn
