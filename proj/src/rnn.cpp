#include "reat/rnn.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <stdexcept>
#include <string>

namespace reat {

std::string_view to_string(Architecture arch) noexcept {
    switch (arch) {
        case Architecture::gru: return "gru";
        case Architecture::lstm: return "lstm";
        case Architecture::bigru: return "bigru";
    }
    return "unknown";
}

Architecture parse_architecture(std::string_view name) {
    std::string lower(name);
    std::transform(lower.begin(), lower.end(), lower.begin(),
                   [](unsigned char ch) { return static_cast<char>(std::tolower(ch)); });
    if (lower == "gru") return Architecture::gru;
    if (lower == "lstm") return Architecture::lstm;
    if (lower == "bigru") return Architecture::bigru;
    throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

GruParams GruParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    GruParams p;
    p.wrx = Matrix(hidden_dim, input_dim);
    p.wrh = Matrix(hidden_dim, hidden_dim);
    p.br = Vector(hidden_dim, 0.0);
    p.wux = p.wrx;
    p.wuh = p.wrh;
    p.bu = p.br;
    p.wgx = p.wrx;
    p.wgh = p.wrh;
    p.bg = p.br;
    return p;
}

LstmParams LstmParams::zeros(std::size_t input_dim, std::size_t hidden_dim) {
    LstmParams p;
    const Matrix wx(hidden_dim, input_dim);
    const Matrix wh(hidden_dim, hidden_dim);
    const Vector b(hidden_dim, 0.0);
    p.wix = wx, p.wih = wh, p.bi = b;
    p.wfx = wx, p.wfh = wh, p.bf = b;
    p.wox = wx, p.woh = wh, p.bo = b;
    p.wgx = wx, p.wgh = wh, p.bg = b;
    return p;
}

RnnModel RnnModel::zeros(Architecture arch, const ModelDims& dims) {
    if (dims.vocab_size == 0 || dims.embed_dim == 0 || dims.hidden_dim == 0 || dims.num_classes == 0)
        throw DimensionError("model dimensions must all be positive");
    RnnModel m;
    m.arch = arch;
    m.embedding = Matrix(dims.vocab_size, dims.embed_dim);
    switch (arch) {
        case Architecture::gru:
            m.gru = GruParams::zeros(dims.embed_dim, dims.hidden_dim);
            break;
        case Architecture::bigru:
            m.gru = GruParams::zeros(dims.embed_dim, dims.hidden_dim);
            m.gru_reverse = m.gru;
            break;
        case Architecture::lstm:
            m.lstm = LstmParams::zeros(dims.embed_dim, dims.hidden_dim);
            break;
    }
    m.output = Matrix(dims.num_classes, m.feature_dim());
    return m;
}

ModelDims RnnModel::dims() const noexcept {
    const std::size_t hidden = arch == Architecture::lstm ? lstm.hidden_dim() : gru.hidden_dim();
    return {embedding.rows(), embedding.cols(), hidden, output.rows()};
}

std::size_t RnnModel::feature_dim() const noexcept {
    const std::size_t hidden = dims().hidden_dim;
    return arch == Architecture::bigru ? 2 * hidden : hidden;
}

namespace {

template <typename Model, typename Block>
std::vector<Block> collect_blocks(Model& m) {
    std::vector<Block> blocks;
    auto add = [&](auto& x) {
        if constexpr (requires { x.values(); })
            blocks.emplace_back(x.values());
        else
            blocks.emplace_back(x);
    };
    auto add_gru = [&](auto& g) {
        add(g.wrx), add(g.wrh), add(g.br);
        add(g.wux), add(g.wuh), add(g.bu);
        add(g.wgx), add(g.wgh), add(g.bg);
    };
    add(m.embedding);
    switch (m.arch) {
        case Architecture::gru: add_gru(m.gru); break;
        case Architecture::bigru:
            add_gru(m.gru);
            add_gru(m.gru_reverse);
            break;
        case Architecture::lstm: {
            auto& l = m.lstm;
            add(l.wix), add(l.wih), add(l.bi);
            add(l.wfx), add(l.wfh), add(l.bf);
            add(l.wox), add(l.woh), add(l.bo);
            add(l.wgx), add(l.wgh), add(l.bg);
            break;
        }
    }
    add(m.output);
    return blocks;
}

}  // namespace

std::vector<std::span<double>> RnnModel::parameter_blocks() {
    return collect_blocks<RnnModel, std::span<double>>(*this);
}

std::vector<std::span<const double>> RnnModel::parameter_blocks() const {
    return collect_blocks<const RnnModel, std::span<const double>>(*this);
}

std::size_t RnnModel::parameter_count() const {
    std::size_t n = 0;
    for (auto block : parameter_blocks()) n += block.size();
    return n;
}

namespace {

void check_gru(const GruParams& g, std::size_t d, std::size_t h) {
    auto mat = [&](const Matrix& m, std::size_t cols) {
        if (m.rows() != h || m.cols() != cols) throw DimensionError("GRU weight shape mismatch");
    };
    auto vec = [&](const Vector& v) {
        if (v.size() != h) throw DimensionError("GRU bias shape mismatch");
    };
    mat(g.wrx, d), mat(g.wux, d), mat(g.wgx, d);
    mat(g.wrh, h), mat(g.wuh, h), mat(g.wgh, h);
    vec(g.br), vec(g.bu), vec(g.bg);
}

void check_lstm(const LstmParams& l, std::size_t d, std::size_t h) {
    auto mat = [&](const Matrix& m, std::size_t cols) {
        if (m.rows() != h || m.cols() != cols) throw DimensionError("LSTM weight shape mismatch");
    };
    auto vec = [&](const Vector& v) {
        if (v.size() != h) throw DimensionError("LSTM bias shape mismatch");
    };
    mat(l.wix, d), mat(l.wfx, d), mat(l.wox, d), mat(l.wgx, d);
    mat(l.wih, h), mat(l.wfh, h), mat(l.woh, h), mat(l.wgh, h);
    vec(l.bi), vec(l.bf), vec(l.bo), vec(l.bg);
}

}  // namespace

void validate(const RnnModel& model) {
    const ModelDims dims = model.dims();
    if (dims.vocab_size == 0 || dims.embed_dim == 0 || dims.hidden_dim == 0 || dims.num_classes == 0)
        throw DimensionError("model has an empty dimension");
    switch (model.arch) {
        case Architecture::gru: check_gru(model.gru, dims.embed_dim, dims.hidden_dim); break;
        case Architecture::bigru:
            check_gru(model.gru, dims.embed_dim, dims.hidden_dim);
            check_gru(model.gru_reverse, dims.embed_dim, dims.hidden_dim);
            break;
        case Architecture::lstm: check_lstm(model.lstm, dims.embed_dim, dims.hidden_dim); break;
    }
    if (model.output.cols() != model.feature_dim()) throw DimensionError("output layer width mismatch");
}

RnnModel init_model(Architecture arch, const ModelDims& dims, std::uint64_t seed, double scale) {
    RnnModel m = RnnModel::zeros(arch, dims);
    Rng rng(seed);
    for (auto block : m.parameter_blocks()) {
        Rng stream = rng.split();
        fill_uniform(block, stream, -scale, scale);
    }
    return m;
}

GruStep gru_step(const GruParams& p, std::span<const double> h_prev, std::span<const double> x) {
    const std::size_t h = p.hidden_dim();
    if (h_prev.size() != h) throw DimensionError("gru_step: h_prev length mismatch");
    GruStep out;
    StepGates& g = out.gates;

    Vector ar = affine(p.wrx, x, p.br);
    matvec_accumulate(p.wrh, h_prev, ar);
    g.reset = sigmoid(ar);

    Vector au = affine(p.wux, x, p.bu);
    matvec_accumulate(p.wuh, h_prev, au);
    g.update = sigmoid(au);

    const Vector recur = matvec(p.wgh, h_prev);
    Vector ag = affine(p.wgx, x, p.bg);
    for (std::size_t i = 0; i < h; ++i) ag[i] += g.reset[i] * recur[i];
    g.candidate = tanh(ag);

    out.hidden.resize(h);
    for (std::size_t i = 0; i < h; ++i)
        out.hidden[i] = g.update[i] * h_prev[i] + (1.0 - g.update[i]) * g.candidate[i];
    return out;
}

LstmStep lstm_step(const LstmParams& p, std::span<const double> h_prev, std::span<const double> c_prev,
                   std::span<const double> x) {
    const std::size_t h = p.hidden_dim();
    if (h_prev.size() != h || c_prev.size() != h) throw DimensionError("lstm_step: state length mismatch");
    LstmStep out;
    StepGates& g = out.gates;
    auto gate = [&](const Matrix& wx, const Matrix& wh, const Vector& b) {
        Vector a = affine(wx, x, b);
        matvec_accumulate(wh, h_prev, a);
        return a;
    };
    g.input = sigmoid(gate(p.wix, p.wih, p.bi));
    g.forget = sigmoid(gate(p.wfx, p.wfh, p.bf));
    g.output = sigmoid(gate(p.wox, p.woh, p.bo));
    g.candidate = tanh(gate(p.wgx, p.wgh, p.bg));

    out.cell.resize(h);
    out.hidden.resize(h);
    for (std::size_t i = 0; i < h; ++i) {
        out.cell[i] = g.forget[i] * c_prev[i] + g.input[i] * g.candidate[i];
        out.hidden[i] = g.output[i] * std::tanh(out.cell[i]);
    }
    g.cell = out.cell;
    return out;
}

std::vector<Vector> embed(const RnnModel& model, std::span<const TokenId> tokens) {
    std::vector<Vector> out;
    out.reserve(tokens.size());
    for (TokenId t : tokens) {
        if (t >= model.embedding.rows())
            throw std::out_of_range("token index " + std::to_string(t) + " >= vocabulary size " +
                                    std::to_string(model.embedding.rows()));
        const auto row = model.embedding.row(t);
        out.emplace_back(row.begin(), row.end());
    }
    return out;
}

namespace {

template <typename Order>
DirectionTrace run_gru(const GruParams& p, std::span<const Vector> inputs, Order order) {
    const std::size_t steps = inputs.size();
    DirectionTrace dir;
    dir.hidden.reserve(steps + 1);
    dir.gates.reserve(steps);
    dir.hidden.emplace_back(p.hidden_dim(), 0.0);
    for (std::size_t s = 0; s < steps; ++s) {
        GruStep step = gru_step(p, dir.hidden.back(), inputs[order(s)]);
        dir.hidden.push_back(std::move(step.hidden));
        dir.gates.push_back(std::move(step.gates));
    }
    return dir;
}

DirectionTrace run_lstm(const LstmParams& p, std::span<const Vector> inputs) {
    DirectionTrace dir;
    dir.hidden.emplace_back(p.hidden_dim(), 0.0);
    dir.cell.emplace_back(p.hidden_dim(), 0.0);
    for (const Vector& x : inputs) {
        LstmStep step = lstm_step(p, dir.hidden.back(), dir.cell.back(), x);
        dir.hidden.push_back(std::move(step.hidden));
        dir.cell.push_back(std::move(step.cell));
        dir.gates.push_back(std::move(step.gates));
    }
    return dir;
}

}  // namespace

ForwardTrace forward_inputs(const RnnModel& model, std::span<const Vector> inputs) {
    if (inputs.empty()) throw std::invalid_argument("forward: empty token sequence");
    const std::size_t d = model.embedding.cols();
    for (const Vector& x : inputs)
        if (x.size() != d) throw DimensionError("forward: input vector length != embedding dim");

    const std::size_t steps = inputs.size();
    ForwardTrace trace;
    trace.arch = model.arch;
    switch (model.arch) {
        case Architecture::gru:
            trace.forward = run_gru(model.gru, inputs, [](std::size_t s) { return s; });
            trace.features = trace.forward.hidden.back();
            break;
        case Architecture::lstm:
            trace.forward = run_lstm(model.lstm, inputs);
            trace.features = trace.forward.hidden.back();
            break;
        case Architecture::bigru:
            trace.forward = run_gru(model.gru, inputs, [](std::size_t s) { return s; });
            trace.reverse = run_gru(model.gru_reverse, inputs, [steps](std::size_t s) { return steps - 1 - s; });
            trace.features = concat(trace.forward.hidden.back(), trace.reverse->hidden.back());
            break;
    }
    trace.logits = matvec(model.output, trace.features);
    trace.probabilities = softmax(trace.logits);
    return trace;
}

ForwardTrace forward(const RnnModel& model, std::span<const TokenId> tokens) {
    if (tokens.empty()) throw std::invalid_argument("forward: empty token sequence");
    const std::vector<Vector> inputs = embed(model, tokens);
    ForwardTrace trace = forward_inputs(model, inputs);
    trace.tokens.assign(tokens.begin(), tokens.end());
    return trace;
}

namespace {

// Backpropagates dh_final through one GRU direction. `position(s)` maps the
// processing step s (0-based) to the input index it consumed.
template <typename Position>
void backprop_gru(const GruParams& p, const DirectionTrace& dir, std::span<const Vector> inputs,
                  Vector dh, Position position, std::vector<Vector>& input_grads, GruParams* grads) {
    const std::size_t h = p.hidden_dim();
    Vector dau(h), dar(h), dag(h), dm(h);
    for (std::size_t s = dir.steps(); s-- > 0;) {
        const StepGates& g = dir.gates[s];
        const Vector& hp = dir.hidden[s];
        const Vector& x = inputs[position(s)];
        const Vector recur = matvec(p.wgh, hp);

        Vector dhp(h, 0.0);
        for (std::size_t i = 0; i < h; ++i) {
            const double u = g.update[i], r = g.reset[i], c = g.candidate[i];
            const double du = dh[i] * (hp[i] - c);
            const double dc = dh[i] * (1.0 - u);
            dhp[i] = dh[i] * u;
            dag[i] = dc * (1.0 - c * c);
            dm[i] = dag[i] * r;
            dar[i] = dag[i] * recur[i] * r * (1.0 - r);
            dau[i] = du * u * (1.0 - u);
        }

        Vector& dx = input_grads[position(s)];
        matvec_transposed_accumulate(p.wgx, dag, dx);
        matvec_transposed_accumulate(p.wux, dau, dx);
        matvec_transposed_accumulate(p.wrx, dar, dx);
        matvec_transposed_accumulate(p.wgh, dm, dhp);
        matvec_transposed_accumulate(p.wuh, dau, dhp);
        matvec_transposed_accumulate(p.wrh, dar, dhp);

        if (grads) {
            outer_accumulate(grads->wgx, dag, x);
            outer_accumulate(grads->wgh, dm, hp);
            outer_accumulate(grads->wux, dau, x);
            outer_accumulate(grads->wuh, dau, hp);
            outer_accumulate(grads->wrx, dar, x);
            outer_accumulate(grads->wrh, dar, hp);
            for (std::size_t i = 0; i < h; ++i) {
                grads->bg[i] += dag[i];
                grads->bu[i] += dau[i];
                grads->br[i] += dar[i];
            }
        }
        dh = std::move(dhp);
    }
}

void backprop_lstm(const LstmParams& p, const DirectionTrace& dir, std::span<const Vector> inputs, Vector dh,
                   std::vector<Vector>& input_grads, LstmParams* grads) {
    const std::size_t h = p.hidden_dim();
    Vector dc_carry(h, 0.0);
    Vector dai(h), daf(h), dao(h), dag(h);
    for (std::size_t s = dir.steps(); s-- > 0;) {
        const StepGates& g = dir.gates[s];
        const Vector& hp = dir.hidden[s];
        const Vector& cp = dir.cell[s];
        const Vector& x = inputs[s];

        for (std::size_t i = 0; i < h; ++i) {
            const double tc = std::tanh(g.cell[i]);
            const double dout = dh[i] * tc;
            const double dc = dc_carry[i] + dh[i] * g.output[i] * (1.0 - tc * tc);
            const double df = dc * cp[i];
            const double di = dc * g.candidate[i];
            const double dcand = dc * g.input[i];
            dc_carry[i] = dc * g.forget[i];
            dai[i] = di * g.input[i] * (1.0 - g.input[i]);
            daf[i] = df * g.forget[i] * (1.0 - g.forget[i]);
            dao[i] = dout * g.output[i] * (1.0 - g.output[i]);
            dag[i] = dcand * (1.0 - g.candidate[i] * g.candidate[i]);
        }

        Vector dhp(h, 0.0);
        Vector& dx = input_grads[s];
        auto through = [&](const Matrix& wx, const Matrix& wh, const Vector& da) {
            matvec_transposed_accumulate(wx, da, dx);
            matvec_transposed_accumulate(wh, da, dhp);
        };
        through(p.wix, p.wih, dai);
        through(p.wfx, p.wfh, daf);
        through(p.wox, p.woh, dao);
        through(p.wgx, p.wgh, dag);

        if (grads) {
            auto accumulate = [&](Matrix& gwx, Matrix& gwh, Vector& gb, const Vector& da) {
                outer_accumulate(gwx, da, x);
                outer_accumulate(gwh, da, hp);
                for (std::size_t i = 0; i < h; ++i) gb[i] += da[i];
            };
            accumulate(grads->wix, grads->wih, grads->bi, dai);
            accumulate(grads->wfx, grads->wfh, grads->bf, daf);
            accumulate(grads->wox, grads->woh, grads->bo, dao);
            accumulate(grads->wgx, grads->wgh, grads->bg, dag);
        }
        dh = std::move(dhp);
    }
}

}  // namespace

BackwardResult backward(const RnnModel& model, const ForwardTrace& trace, std::span<const Vector> inputs,
                        std::span<const double> dlogits, bool want_param_grads) {
    const std::size_t steps = trace.length();
    if (inputs.size() != steps) throw DimensionError("backward: inputs do not match trace length");
    if (dlogits.size() != model.output.rows()) throw DimensionError("backward: dlogits length mismatch");

    BackwardResult result;
    result.input_grads.assign(steps, Vector(model.embedding.cols(), 0.0));
    if (want_param_grads) {
        ModelDims dims = model.dims();
        result.param_grads = RnnModel::zeros(model.arch, dims);
        result.param_grads->embedding = Matrix();
        outer_accumulate(result.param_grads->output, dlogits, trace.features);
    }
    RnnModel* grads = result.param_grads ? &*result.param_grads : nullptr;

    const Vector dfeatures = matvec_transposed(model.output, dlogits);
    const auto identity = [](std::size_t s) { return s; };
    switch (model.arch) {
        case Architecture::gru:
            backprop_gru(model.gru, trace.forward, inputs, dfeatures, identity, result.input_grads,
                         grads ? &grads->gru : nullptr);
            break;
        case Architecture::lstm:
            backprop_lstm(model.lstm, trace.forward, inputs, dfeatures, result.input_grads,
                          grads ? &grads->lstm : nullptr);
            break;
        case Architecture::bigru: {
            const std::size_t h = model.gru.hidden_dim();
            const Vector dn(dfeatures.begin(), dfeatures.begin() + static_cast<std::ptrdiff_t>(h));
            const Vector dr(dfeatures.begin() + static_cast<std::ptrdiff_t>(h), dfeatures.end());
            backprop_gru(model.gru, trace.forward, inputs, dn, identity, result.input_grads,
                         grads ? &grads->gru : nullptr);
            backprop_gru(model.gru_reverse, *trace.reverse, inputs, dr,
                         [steps](std::size_t s) { return steps - 1 - s; }, result.input_grads,
                         grads ? &grads->gru_reverse : nullptr);
            break;
        }
    }
    return result;
}

std::vector<Vector> grad_wrt_inputs(const RnnModel& model, std::span<const Vector> inputs, ClassIndex target_class) {
    if (target_class >= model.output.rows()) throw std::out_of_range("target class out of range");
    const ForwardTrace trace = forward_inputs(model, inputs);
    Vector dlogits(model.output.rows(), 0.0);
    dlogits[target_class] = 1.0;
    return backward(model, trace, inputs, dlogits, false).input_grads;
}

Matrix grad_wrt_embeddings(const RnnModel& model, std::span<const TokenId> tokens, ClassIndex target_class) {
    if (tokens.empty()) throw std::invalid_argument("forward: empty token sequence");
    const std::vector<Vector> inputs = embed(model, tokens);
    const std::vector<Vector> grads = grad_wrt_inputs(model, inputs, target_class);
    Matrix out(grads.size(), model.embedding.cols());
    for (std::size_t t = 0; t < grads.size(); ++t) std::copy(grads[t].begin(), grads[t].end(), out.row(t).begin());
    return out;
}

}  // namespace reat
