#pragma once

#include <iosfwd>
#include <string>
#include <vector>

#include "curstat/nonparam.hpp"
#include "curstat/simulate.hpp"
#include "curstat/tree.hpp"

namespace curstat {

// {"states": [...], "edges": [[from, to], ...], "names": {"0": "...", ...}}
// or the strings "five" / "seven" for the built-in trees.
MultistateTree tree_from_json(const std::string& text);
std::string tree_to_json(const MultistateTree& tree);
MultistateTree read_tree(const std::string& path);

struct Dataset {
  std::vector<CurrentStatusRecord> records;
  std::vector<std::string> covariate_names;
};

// CSV with header `id,time,state[,covariates...]`. States may be labels or
// names from the tree. `covariates` selects extra columns; empty takes none.
// A missing column raises ArgumentError naming it.
Dataset read_records_csv(std::istream& in, const MultistateTree& tree,
                         const std::vector<std::string>& covariates = {});
Dataset read_records_csv(const std::string& path, const MultistateTree& tree,
                         const std::vector<std::string>& covariates = {});
void write_records_csv(std::ostream& out, const Dataset& data);

// Right-censored histories as `id,time,state` rows, one per state entry, with
// state `cens` marking the end of follow-up. Subjects without a `cens` row are
// followed indefinitely.
std::vector<EventHistory> read_event_histories(std::istream& in, const MultistateTree& tree);
std::vector<EventHistory> read_event_histories(const std::string& path, const MultistateTree& tree);

std::string read_text_file(const std::string& path);

}  // namespace curstat
