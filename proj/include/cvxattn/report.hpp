#pragma once

#include <string>

#include "cvxattn/arrangements.hpp"
#include "cvxattn/nonconvex.hpp"
#include "cvxattn/solvers.hpp"

namespace cvxattn {

// JSON with a fixed key order (insertion order), so identical runs produce
// byte-identical reports.
std::string report_to_json(const TrainReport& rep, double top1, double top5);
void write_report(const std::string& path, const TrainReport& rep, double top1 = -1,
                  double top5 = -1);

// Portable binary variable files ("CVXVARS1"): a list of blocks, each a list
// of matrices; and non-convex weights ("CVXWNC1\0") storing W1/W2/gate per
// pair. Arrangements serialize masks, witnesses, gates, and the effective
// matrix ("CVXARR1\0").
void write_convex_vars(const std::string& path, const ConvexVars& vars);
ConvexVars read_convex_vars(const std::string& path);
void write_nc_weights(const std::string& path, const NonconvexWeights& w);
NonconvexWeights read_nc_weights(const std::string& path);
void write_arrangements(const std::string& path, const ArrangementSet& set);
ArrangementSet read_arrangements(const std::string& path);

// Top-k training accuracy for pooled classification batches (r = 1, one-hot
// labels): fraction of samples whose true class is among the k largest pooled
// logits.
double topk_accuracy(const std::vector<Matrix>& preds, const std::vector<Matrix>& Y, int k);

}  // namespace cvxattn
