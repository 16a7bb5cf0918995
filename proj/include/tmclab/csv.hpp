#pragma once

#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "tmclab/common.hpp"

namespace tmclab {

// deterministic fixed-precision formatting so reruns are byte-identical
inline std::string fmt_double(double v, int decimals = 6) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
    return buf;
}

class CsvWriter {
public:
    CsvWriter(const std::string& path, const std::vector<std::string>& header) {
        out_.open(path);
        if (!out_) throw TmcError(ErrorCode::IoError, "cannot open '" + path + "' for writing");
        write_row(header);
    }

    void write_row(const std::vector<std::string>& cells) {
        for (size_t i = 0; i < cells.size(); ++i) {
            if (i) out_ << ',';
            out_ << cells[i];
        }
        out_ << '\n';
    }

private:
    std::ofstream out_;
};

} // namespace tmclab
