#include "crctc/peakedness.hpp"

#include <iomanip>

namespace crctc {

void write_peak_stats_csv_row(std::ostream& os, const PeakStats& s) {
  const auto old = os.precision(10);
  os << s.mean_nonblank_duration() << ',' << s.mean_blank_emit_prob() << ','
     << s.mean_nonblank_emit_prob() << ',' << s.nonblank_emissions << ','
     << s.nonblank_frames << ',' << s.blank_frames << '\n';
  os.precision(old);
}

}  // namespace crctc
