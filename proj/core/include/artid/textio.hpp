#ifndef ARTID_TEXTIO_HPP_
#define ARTID_TEXTIO_HPP_

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace artid {

// Shortest round-trip decimal representation (to_chars based), so repeated
// runs produce byte-identical report files.
std::string format_double(double value);
std::string format_float(float value);

// Minimal CSV writer: quotes only when a field needs it.
class CsvWriter {
 public:
  explicit CsvWriter(std::ostream& out) : out_(out) {}

  void row(const std::vector<std::string>& fields);

 private:
  std::ostream& out_;
};

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& contents);

}  // namespace artid

#endif  // ARTID_TEXTIO_HPP_
