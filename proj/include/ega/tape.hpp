#pragma once

#include <cstddef>
#include <functional>
#include <map>
#include <optional>
#include <tuple>
#include <vector>

#include "ega/attention.hpp"
#include "ega/matrix.hpp"
#include "ega/rig.hpp"

namespace ega {

// Reverse-mode tape over the operations the attention path uses: matmul,
// fused scaled-dot-product softmax, concatenation, column slicing, layer
// norm, residual add and the scalar reductions that seed a backward pass.
// Not a general autodiff system. Nodes append in topological order; the
// backward sweep visits each node at most once, in reverse.
//
// Forward values are computed through the same tensor_core calls as the
// plain attention path, so a taped forward is bit-identical to ega_block.
class Tape {
public:
    using NodeId = std::size_t;

    NodeId leaf(Matrix value);

    NodeId matmul(NodeId a, NodeId b);
    // softmax(Q K^T / sqrt(scale_dim)); the raw score matrix never lands
    // on the tape, which keeps full-rig tapes within memory budget.
    NodeId attention_weights(NodeId q, NodeId k, std::size_t scale_dim);
    NodeId concat_rows(const std::vector<NodeId>& parts);
    NodeId concat_cols(const std::vector<NodeId>& parts);
    NodeId slice_cols(NodeId a, std::size_t begin, std::size_t end);
    NodeId add(NodeId a, NodeId b);
    NodeId scale(NodeId a, double factor);
    NodeId layer_norm(NodeId x, NodeId gain, NodeId bias, double eps = kLayerNormEps);
    NodeId sum(NodeId a);                              // 1x1
    NodeId sum_squared_diff(NodeId a, Matrix target);  // 1x1

    const Matrix& value(NodeId id) const;

    // Seeds d(root)/d(root) = seed and sweeps the tape in reverse. root
    // must be 1x1 (UsageError otherwise). May be called repeatedly with
    // different roots; gradients reset each time. After the sweep every
    // leaf holds a gradient; leaves off the path hold exact zeros.
    void backward(NodeId root, double seed = 1.0);

    // Leaf gradient after backward(). UsageError before any backward pass.
    const Matrix& grad(NodeId id) const;

    std::size_t node_count() const { return nodes_.size(); }

private:
    struct Node {
        Matrix value;
        std::optional<Matrix> grad;
        bool is_leaf = false;
        std::function<void(Tape&, NodeId)> backprop;
    };

    NodeId push(Matrix value, std::function<void(Tape&, NodeId)> backprop, bool is_leaf = false);
    const Matrix& node_grad(NodeId id) const { return *nodes_[id].grad; }
    void accumulate(NodeId id, const Matrix& contribution);
    // Adds into a column range of id's gradient; used by slice backward.
    void accumulate_cols(NodeId id, std::size_t begin, const Matrix& contribution);

    std::vector<Node> nodes_;
    bool swept_ = false;
};

// Leaf ids for one block's parameter matrices.
struct TapedEgaParams {
    Tape::NodeId w_q, w_k, w_v, w_o;
    std::optional<Tape::NodeId> p_k, p_v;
    Tape::NodeId query_gain, query_bias, ref_gain, ref_bias;
};

TapedEgaParams record_params(Tape& tape, const EgaParams& params);

// Taped mirror of ega_block; same op sequence, same values.
Tape::NodeId ega_block_tape(Tape& tape, Tape::NodeId query, Tape::NodeId reference,
                            const TapedEgaParams& params, const AttentionOptions& options);

// Whole-rig recording with addressable feature and parameter leaves, for
// gradient locality probes.
struct RigTape {
    Tape tape;
    std::map<std::tuple<std::size_t, std::size_t, int>, Tape::NodeId> features;
    std::vector<std::vector<Tape::NodeId>> outputs;        // [view][scale]
    std::vector<std::vector<TapedEgaParams>> params;       // [view][scale]
};

RigTape record_rig(const FeatureSet& features, const RigParams& params, const RigConfig& config);

}  // namespace ega
