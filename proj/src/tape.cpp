#include "ega/tape.hpp"

#include <cmath>
#include <memory>
#include <utility>

#include "ega/errors.hpp"

namespace ega {

Tape::NodeId Tape::push(Matrix value, std::function<void(Tape&, NodeId)> backprop,
                        bool is_leaf) {
    nodes_.push_back({std::move(value), std::nullopt, is_leaf, std::move(backprop)});
    return nodes_.size() - 1;
}

Tape::NodeId Tape::leaf(Matrix value) { return push(std::move(value), nullptr, true); }

const Matrix& Tape::value(NodeId id) const { return nodes_[id].value; }

void Tape::accumulate(NodeId id, const Matrix& contribution) {
    Node& node = nodes_[id];
    if (!node.grad) node.grad = Matrix(node.value.rows(), node.value.cols());
    for (std::size_t i = 0; i < contribution.size(); ++i)
        node.grad->data()[i] += contribution.data()[i];
}

void Tape::accumulate_cols(NodeId id, std::size_t begin, const Matrix& contribution) {
    Node& node = nodes_[id];
    if (!node.grad) node.grad = Matrix(node.value.rows(), node.value.cols());
    for (std::size_t i = 0; i < contribution.rows(); ++i) {
        double* dst = node.grad->row(i) + begin;
        const double* src = contribution.row(i);
        for (std::size_t j = 0; j < contribution.cols(); ++j) dst[j] += src[j];
    }
}

Tape::NodeId Tape::matmul(NodeId a, NodeId b) {
    Matrix out = ega::matmul(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        const Matrix& g = t.node_grad(self);
        t.accumulate(a, ega::matmul(g, transpose(t.value(b))));
        t.accumulate(b, ega::matmul(transpose(t.value(a)), g));
    });
}

Tape::NodeId Tape::attention_weights(NodeId q, NodeId k, std::size_t scale_dim) {
    const double inv = 1.0 / std::sqrt(static_cast<double>(scale_dim));
    Matrix weights = softmax_rows(scaled(ega::matmul(value(q), transpose(value(k))), inv));
    return push(std::move(weights), [q, k, inv](Tape& t, NodeId self) {
        const Matrix& p = t.value(self);
        const Matrix& dp = t.node_grad(self);
        // Softmax rows: dS = P o (dP - rowsum(dP o P)).
        Matrix ds(p.rows(), p.cols());
        for (std::size_t i = 0; i < p.rows(); ++i) {
            const double* p_row = p.row(i);
            const double* dp_row = dp.row(i);
            double dot = 0.0;
            for (std::size_t j = 0; j < p.cols(); ++j) dot += dp_row[j] * p_row[j];
            double* ds_row = ds.row(i);
            for (std::size_t j = 0; j < p.cols(); ++j)
                ds_row[j] = p_row[j] * (dp_row[j] - dot);
        }
        t.accumulate(q, scaled(ega::matmul(ds, t.value(k)), inv));
        t.accumulate(k, scaled(ega::matmul(transpose(ds), t.value(q)), inv));
    });
}

Tape::NodeId Tape::concat_rows(const std::vector<NodeId>& parts) {
    std::vector<Matrix> values;
    std::vector<std::size_t> row_counts;
    values.reserve(parts.size());
    for (NodeId id : parts) {
        values.push_back(value(id));
        row_counts.push_back(value(id).rows());
    }
    Matrix out = ega::concat_rows(values);
    return push(std::move(out), [parts, row_counts](Tape& t, NodeId self) {
        const Matrix& g = t.node_grad(self);
        std::size_t r = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            t.accumulate(parts[i], slice_rows(g, r, r + row_counts[i]));
            r += row_counts[i];
        }
    });
}

Tape::NodeId Tape::concat_cols(const std::vector<NodeId>& parts) {
    std::vector<Matrix> values;
    std::vector<std::size_t> col_counts;
    values.reserve(parts.size());
    for (NodeId id : parts) {
        values.push_back(value(id));
        col_counts.push_back(value(id).cols());
    }
    Matrix out = ega::concat_cols(values);
    return push(std::move(out), [parts, col_counts](Tape& t, NodeId self) {
        const Matrix& g = t.node_grad(self);
        std::size_t c = 0;
        for (std::size_t i = 0; i < parts.size(); ++i) {
            t.accumulate(parts[i], ega::slice_cols(g, c, c + col_counts[i]));
            c += col_counts[i];
        }
    });
}

Tape::NodeId Tape::slice_cols(NodeId a, std::size_t begin, std::size_t end) {
    Matrix out = ega::slice_cols(value(a), begin, end);
    return push(std::move(out), [a, begin](Tape& t, NodeId self) {
        t.accumulate_cols(a, begin, t.node_grad(self));
    });
}

Tape::NodeId Tape::add(NodeId a, NodeId b) {
    Matrix out = ega::add(value(a), value(b));
    return push(std::move(out), [a, b](Tape& t, NodeId self) {
        t.accumulate(a, t.node_grad(self));
        t.accumulate(b, t.node_grad(self));
    });
}

Tape::NodeId Tape::scale(NodeId a, double factor) {
    Matrix out = ega::scaled(value(a), factor);
    return push(std::move(out), [a, factor](Tape& t, NodeId self) {
        t.accumulate(a, scaled(t.node_grad(self), factor));
    });
}

Tape::NodeId Tape::layer_norm(NodeId x, NodeId gain, NodeId bias, double eps) {
    Matrix out = ega::layer_norm(value(x), value(gain), value(bias), eps);
    return push(std::move(out), [x, gain, bias, eps](Tape& t, NodeId self) {
        const Matrix& in = t.value(x);
        const Matrix& g = t.value(gain);
        const Matrix& dy = t.node_grad(self);
        const std::size_t c = in.cols();
        Matrix dx(in.rows(), c);
        Matrix dgain(1, c);
        Matrix dbias(1, c);
        for (std::size_t i = 0; i < in.rows(); ++i) {
            const double* in_row = in.row(i);
            const double* dy_row = dy.row(i);
            double mean = 0.0;
            for (std::size_t j = 0; j < c; ++j) mean += in_row[j];
            mean /= static_cast<double>(c);
            double var = 0.0;
            for (std::size_t j = 0; j < c; ++j) {
                const double d = in_row[j] - mean;
                var += d * d;
            }
            var /= static_cast<double>(c);
            const double inv_std = 1.0 / std::sqrt(var + eps);
            double m1 = 0.0;  // mean of gain-weighted dy
            double m2 = 0.0;  // mean of gain-weighted dy times normalized x
            for (std::size_t j = 0; j < c; ++j) {
                const double xn = (in_row[j] - mean) * inv_std;
                const double dxn = dy_row[j] * g(0, j);
                m1 += dxn;
                m2 += dxn * xn;
                dgain(0, j) += dy_row[j] * xn;
                dbias(0, j) += dy_row[j];
            }
            m1 /= static_cast<double>(c);
            m2 /= static_cast<double>(c);
            double* dx_row = dx.row(i);
            for (std::size_t j = 0; j < c; ++j) {
                const double xn = (in_row[j] - mean) * inv_std;
                const double dxn = dy_row[j] * g(0, j);
                dx_row[j] = inv_std * (dxn - m1 - xn * m2);
            }
        }
        t.accumulate(x, dx);
        t.accumulate(gain, dgain);
        t.accumulate(bias, dbias);
    });
}

Tape::NodeId Tape::sum(NodeId a) {
    Matrix out(1, 1, ega::sum(value(a)));
    return push(std::move(out), [a](Tape& t, NodeId self) {
        const double seed = t.node_grad(self)(0, 0);
        t.accumulate(a, Matrix(t.value(a).rows(), t.value(a).cols(), seed));
    });
}

Tape::NodeId Tape::sum_squared_diff(NodeId a, Matrix target) {
    const Matrix& av = value(a);
    if (!av.same_shape(target))
        throw ShapeError("sum_squared_diff: value " + av.shape_str() + " vs target " +
                         target.shape_str());
    double total = 0.0;
    for (std::size_t i = 0; i < av.size(); ++i) {
        const double d = av.data()[i] - target.data()[i];
        total += d * d;
    }
    auto target_ptr = std::make_shared<Matrix>(std::move(target));
    return push(Matrix(1, 1, total), [a, target_ptr](Tape& t, NodeId self) {
        const double seed = t.node_grad(self)(0, 0);
        Matrix contrib = sub(t.value(a), *target_ptr);
        for (double& v : contrib.data()) v *= 2.0 * seed;
        t.accumulate(a, contrib);
    });
}

void Tape::backward(NodeId root, double seed) {
    const Matrix& root_value = nodes_.at(root).value;
    if (root_value.rows() != 1 || root_value.cols() != 1)
        throw UsageError("backward: root must be scalar (1x1), got " + root_value.shape_str());
    for (Node& node : nodes_) node.grad.reset();
    nodes_[root].grad = Matrix(1, 1, seed);
    for (NodeId id = root + 1; id-- > 0;) {
        Node& node = nodes_[id];
        if (!node.grad) continue;
        if (node.backprop) {
            node.backprop(*this, id);
            // Interior gradients are consumed exactly once; release them so
            // full-rig sweeps stay within a few matrices of transient memory.
            node.grad.reset();
        }
    }
    for (Node& node : nodes_) {
        if (node.is_leaf && !node.grad) node.grad = Matrix(node.value.rows(), node.value.cols());
    }
    swept_ = true;
}

const Matrix& Tape::grad(NodeId id) const {
    if (!swept_) throw UsageError("grad: no backward pass has run on this tape");
    const Node& node = nodes_[id];
    if (!node.grad)
        throw UsageError("grad: node " + std::to_string(id) + " holds no gradient (not a leaf)");
    return *node.grad;
}

TapedEgaParams record_params(Tape& tape, const EgaParams& params) {
    TapedEgaParams ids{};
    ids.w_q = tape.leaf(params.w_q);
    ids.w_k = tape.leaf(params.w_k);
    ids.w_v = tape.leaf(params.w_v);
    ids.w_o = tape.leaf(params.w_o);
    if (params.p_k) ids.p_k = tape.leaf(*params.p_k);
    if (params.p_v) ids.p_v = tape.leaf(*params.p_v);
    ids.query_gain = tape.leaf(params.query_gain);
    ids.query_bias = tape.leaf(params.query_bias);
    ids.ref_gain = tape.leaf(params.ref_gain);
    ids.ref_bias = tape.leaf(params.ref_bias);
    return ids;
}

Tape::NodeId ega_block_tape(Tape& tape, Tape::NodeId query, Tape::NodeId reference,
                            const TapedEgaParams& params, const AttentionOptions& options) {
    const std::size_t c = tape.value(query).cols();
    const std::size_t z = options.heads;
    if (z == 0 || c % z != 0)
        throw ConfigError("ega_block_tape: " + std::to_string(z) + " heads do not divide " +
                          std::to_string(c) + " channels");

    Tape::NodeId nq = options.use_norm
                          ? tape.layer_norm(query, params.query_gain, params.query_bias)
                          : query;
    Tape::NodeId nr = options.use_norm
                          ? tape.layer_norm(reference, params.ref_gain, params.ref_bias)
                          : reference;
    Tape::NodeId q = tape.matmul(nq, params.w_q);
    Tape::NodeId k = tape.matmul(nr, params.w_k);
    Tape::NodeId v = tape.matmul(nr, params.w_v);
    if (params.p_k) {
        k = tape.matmul(*params.p_k, k);
        v = tape.matmul(*params.p_v, v);
    }

    const std::size_t head_width = c / z;
    const std::size_t scale_dim = options.literal_sqrt_c ? c : head_width;
    std::vector<Tape::NodeId> heads;
    heads.reserve(z);
    for (std::size_t h = 0; h < z; ++h) {
        const std::size_t begin = h * head_width;
        const std::size_t end = begin + head_width;
        Tape::NodeId weights = tape.attention_weights(tape.slice_cols(q, begin, end),
                                                      tape.slice_cols(k, begin, end), scale_dim);
        heads.push_back(tape.matmul(weights, tape.slice_cols(v, begin, end)));
    }
    return tape.add(tape.matmul(tape.concat_cols(heads), params.w_o), query);
}

RigTape record_rig(const FeatureSet& features, const RigParams& params,
                   const RigConfig& config) {
    validate(config);
    RigTape rig;
    for (std::size_t v = 0; v < config.num_cameras; ++v) {
        for (std::size_t s = 0; s < config.scales.size(); ++s) {
            for (std::size_t t = 0; t <= config.temporal_frames; ++t) {
                const int offset = -static_cast<int>(t);
                rig.features[{v, s, offset}] = rig.tape.leaf(features.at(v, s, offset));
            }
        }
    }
    rig.outputs.resize(config.num_cameras);
    rig.params.resize(config.num_cameras);
    for (std::size_t v = 0; v < config.num_cameras; ++v) {
        for (std::size_t s = 0; s < config.scales.size(); ++s) {
            std::vector<Tape::NodeId> ref_parts;
            for (std::size_t neighbor : config.neighbors[v])
                ref_parts.push_back(rig.features.at({neighbor, s, 0}));
            for (std::size_t t = 1; t <= config.temporal_frames; ++t)
                ref_parts.push_back(rig.features.at({v, s, -static_cast<int>(t)}));
            Tape::NodeId reference = rig.tape.concat_rows(ref_parts);
            TapedEgaParams block = record_params(rig.tape, params.at(v, s));
            rig.params[v].push_back(block);
            rig.outputs[v].push_back(ega_block_tape(rig.tape, rig.features.at({v, s, 0}),
                                                    reference, block,
                                                    AttentionOptions::from(config)));
        }
    }
    return rig;
}

}  // namespace ega
