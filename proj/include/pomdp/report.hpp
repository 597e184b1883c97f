#pragma once

#include "pomdp/types.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace pomdp {

using Json = nlohmann::ordered_json;

/// Shortest decimal with 17 significant digits ("%.17g").
std::string format_double(double v);

/// Minimal CSV builder; numbers are always written in full precision.
class CsvTable {
public:
    explicit CsvTable(std::vector<std::string> header);
    void add_row(const std::vector<double>& values);
    void add_row(const std::vector<std::string>& cells);
    std::string str() const;
    void write(const std::string& path) const;

private:
    std::vector<std::string> header_;
    std::vector<std::vector<std::string>> rows_;
};

Json to_json(const Vector& v);
Json to_json(const Matrix& m);

void write_text(const std::string& path, const std::string& text);

}  // namespace pomdp
