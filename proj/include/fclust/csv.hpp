#ifndef FCLUST_CSV_HPP
#define FCLUST_CSV_HPP

#include <string>
#include <vector>

namespace fclust {

// Minimal CSV table: header row required, comma separated, double quotes
// escape fields containing commas/quotes/newlines.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  int column(const std::string& name) const;  // -1 when absent
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const CsvTable& table);

std::string format_double(double v);  // shortest text that round-trips

}  // namespace fclust

#endif
