#include "mmgan/gradcheck_suite.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>

#include "mmgan/encoders.hpp"
#include "mmgan/grad_check.hpp"
#include "mmgan/losses.hpp"
#include "mmgan/models.hpp"
#include "mmgan/ops.hpp"
#include "mmgan/random.hpp"

namespace mmgan::train {

namespace {
Tensor rnd(Shape s, std::uint64_t seed, double lo = -1, double hi = 1) {
  Rng rng = substream(0x9c, "gradcheck", seed);
  Tensor t(std::move(s));
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

// Weighted sum so every output coordinate carries a distinct sensitivity.
Var probe(Var y, std::uint64_t seed) { return sum(y * y.tape().constant(rnd(y.shape(), 1000 + seed))); }

GradcheckEntry unary(std::string name, Shape s, std::function<Var(Var)> f, double lo = -1, double hi = 1) {
  const auto seed = fnv1a(name);
  return {name, [=] { return grad_check([&](Var x) { return probe(f(x), seed); }, rnd(s, seed, lo, hi)); }};
}

// The second operand stays fixed while the first is checked.
GradcheckEntry binary(std::string name, Shape sx, Shape sy, std::function<Var(Var, Var)> f) {
  const auto seed = fnv1a(name);
  return {name, [=] {
            const Tensor y = rnd(sy, seed + 1);
            return grad_check([&](Var x) { return probe(f(x, x.tape().constant(y)), seed); }, rnd(sx, seed));
          }};
}

GradcheckEntry binary_rhs(std::string name, Shape sx, Shape sy, std::function<Var(Var, Var)> f) {
  const auto seed = fnv1a(name);
  return {name, [=] {
            const Tensor x = rnd(sx, seed + 1);
            return grad_check([&](Var y) { return probe(f(y.tape().constant(x), y), seed); }, rnd(sy, seed));
          }};
}

ArchConfig tiny_arch() {
  ArchConfig a;
  a.image_size = 16;
  a.d_text = 4;
  a.d_z = 3;
  a.d_style = 3;
  a.d_word = 3;
  a.text_hidden = 4;
  a.max_caption_len = 4;
  a.vocab_size = 6;
  a.style_head_hidden = 4;
  a.g_channels = {4, 3, 2};
  a.d_channels = {2, 3, 4};
  a.enc_channels = {2, 3, 3};
  a.style_channels = {2, 3, 3};
  a.fid_channels = {2, 2, 2};
  a.classifier_channels = {2, 2};
  return a;
}

// A complete tiny model stack with fixed inputs.
struct Stack {
  ArchConfig arch = tiny_arch();
  nn::ParamSet g, d, t, i, h, s;
  Tensor z, real, ref;
  std::vector<enc::TokenIds> tokens{{2, 3, 0, 0}, {4, 5, 2, 0}};

  Stack() {
    g = nn::init_params(models::generator_spec(arch), 1);
    d = nn::init_params(models::discriminator_spec(arch), 2);
    t = nn::init_params(enc::text_encoder_spec(arch), 3);
    i = nn::init_params(enc::image_encoder_spec(arch), 4);
    h = nn::init_params(models::style_head_spec(arch), 5);
    s = nn::init_params(enc::style_net_spec(arch), 6);
    z = rnd({2, arch.d_z}, 7);
    real = rnd({2, 3, 16, 16}, 8);
    ref = rnd({2, 3, 16, 16}, 9);
  }

  struct Graph {
    Var text, fake, d_real, d_fake, l_txt, l_style;
  };

  // Binds every network on `tape`; `which`/`w` replaces one parameter tensor.
  Graph build(Tape& tape, const std::string& net, const std::string& path, Var w) const {
    nn::Bound gb(tape, g, false), db(tape, d, false), tb(tape, t, false), ib(tape, i, false), hb(tape, h, false),
        sb(tape, s, false);
    std::map<std::string, nn::Bound*> by{{"G", &gb}, {"D", &db}, {"text", &tb}, {"image", &ib}, {"style_head", &hb}};
    if (!net.empty()) by.at(net)->rebind(path, w);
    Graph gr;
    gr.text = enc::encode_text(tb, tokens, arch);
    auto ref_taps = enc::style_features(sb, tape.constant(ref), arch);
    Var style = models::style_vector(hb, models::gram_diagonals(ref_taps), arch);
    gr.fake = models::generate(gb, tape.constant(z), gr.text, style, arch);
    gr.d_real = models::discriminate(db, tape.constant(real), gr.text, arch);
    gr.d_fake = models::discriminate(db, gr.fake, gr.text, arch);
    gr.l_txt = loss::text_image_consistency_loss(enc::encode_image(ib, gr.fake, arch), gr.text);
    gr.l_style = loss::style_matching_loss(enc::style_features(sb, gr.fake, arch), ref_taps);
    return gr;
  }

  const nn::ParamSet& set(const std::string& net) const {
    if (net == "G") return g;
    if (net == "D") return d;
    if (net == "text") return t;
    if (net == "image") return i;
    return h;
  }
};

const Stack& stack() {
  static const Stack s;
  return s;
}

GradcheckEntry through_stack(std::string name, std::string net, std::string path,
                             std::function<Var(const Stack::Graph&)> objective) {
  return {name, [=] {
            const Stack& st = stack();
            auto f = [&](Var w) { return objective(st.build(w.tape(), net, path, w)); };
            const Tensor& w0 = st.set(net).at(path);
            // A parameter the objective cannot see would pass vacuously.
            Tape tape;
            Tensor lw = w0;
            lw.set_requires_grad(true);
            Var w = tape.leaf(std::move(lw));
            tape.backward(f(w));
            double peak = 0;
            for (double v : tape.grad(w)) peak = std::max(peak, std::abs(v));
            if (peak == 0) return std::numeric_limits<double>::infinity();
            return grad_check(f, w0);
          }};
}

Var total_objective(const Stack::Graph& g) {
  const loss::LossWeights w;
  return loss::generator_loss(g.d_fake) * w.gan + g.l_txt * w.txt_img + g.l_style * w.style;
}
}  // namespace

std::vector<GradcheckEntry> gradcheck_entries() {
  std::vector<GradcheckEntry> e;
  const Shape v{3, 4};
  e.push_back(binary("op.add", v, v, [](Var a, Var b) { return a + b; }));
  e.push_back(binary("op.sub", v, v, [](Var a, Var b) { return a - b; }));
  e.push_back(binary("op.mul", v, v, [](Var a, Var b) { return a * b; }));
  e.push_back(unary("op.add_scalar", v, [](Var a) { return a + 0.7; }));
  e.push_back(unary("op.mul_scalar", v, [](Var a) { return a * -1.3; }));
  e.push_back(unary("op.leaky_relu", v, [](Var a) { return leaky_relu(a, 0.2); }));
  e.push_back(unary("op.tanh", v, [](Var a) { return tanh(a); }));
  e.push_back(unary("op.sigmoid", v, [](Var a) { return sigmoid(a * 3.0); }));
  e.push_back(unary("op.square", v, [](Var a) { return square(a); }));
  e.push_back(unary("op.sqrt", v, [](Var a) { return sqrt(a); }, 0.2, 2.0));
  e.push_back(unary("op.log", v, [](Var a) { return log(a); }, 0.2, 2.0));
  e.push_back(unary("op.sum", v, [](Var a) { return sum(a); }));
  e.push_back(unary("op.mean", v, [](Var a) { return mean(a); }));
  e.push_back(unary("op.sum_axis", {2, 3, 4}, [](Var a) { return sum_axis(a, 1); }));
  e.push_back(unary("op.mean_axis", {2, 3, 4}, [](Var a) { return mean_axis(a, 2); }));
  e.push_back(binary("op.matmul.lhs", {3, 4}, {4, 2}, [](Var a, Var b) { return matmul(a, b); }));
  e.push_back(binary_rhs("op.matmul.rhs", {3, 4}, {4, 2}, [](Var a, Var b) { return matmul(a, b); }));
  e.push_back(binary_rhs("op.bias_add", {2, 3, 2, 2}, {3}, [](Var x, Var b) { return bias_add(x, b, 1); }));
  e.push_back(unary("op.reshape", {2, 6}, [](Var a) { return reshape(a, {3, 4}); }));
  e.push_back(unary("op.broadcast_to", {2, 1, 3}, [](Var a) { return broadcast_to(a, {4, 2, 5, 3}); }));
  e.push_back(binary("op.concat", {2, 3}, {2, 2}, [](Var a, Var b) { return concat({a, b, a}, 1); }));
  e.push_back(unary("op.instance_norm", {2, 3, 3, 3}, [](Var a) { return instance_norm(a); }));
  e.push_back(unary("op.gram", {2, 3, 5}, [](Var a) { return gram(a); }));
  e.push_back(unary("op.log_softmax", {3, 4}, [](Var a) { return log_softmax(a * 2.0); }));
  e.push_back(unary("op.embedding_mean", {6, 3},
                    [](Var t) { return embedding_mean(t, {{1, 2, 0}, {0, 0, 0}, {5, 5, 3}}); }));
  e.push_back(binary("op.conv2d.input", {2, 3, 6, 6}, {4, 3, 3, 3}, [](Var x, Var k) { return conv2d(x, k, 2, 1); }));
  e.push_back(binary_rhs("op.conv2d.kernel", {2, 3, 6, 6}, {4, 3, 3, 3}, [](Var x, Var k) { return conv2d(x, k, 2, 1); }));
  e.push_back(binary("op.conv_transpose2d.input", {2, 3, 3, 3}, {3, 2, 4, 4},
                     [](Var x, Var k) { return conv_transpose2d(x, k, 2, 1); }));
  e.push_back(binary_rhs("op.conv_transpose2d.kernel", {2, 3, 3, 3}, {3, 2, 4, 4},
                         [](Var x, Var k) { return conv_transpose2d(x, k, 2, 1); }));

  using G = Stack::Graph;
  e.push_back(through_stack("adversarial.value/D.conv0.kernel", "D", "D.conv0.kernel",
                            [](const G& g) { return loss::adversarial_value(g.d_real, g.d_fake); }));
  e.push_back(through_stack("adversarial.d_loss/D.fc.kernel", "D", "D.fc.kernel",
                            [](const G& g) { return loss::discriminator_loss(g.d_real, g.d_fake); }));
  e.push_back(through_stack("adversarial.g_loss/G.fc.kernel", "G", "G.fc.kernel",
                            [](const G& g) { return loss::generator_loss(g.d_fake); }));
  e.push_back(through_stack("adversarial.g_loss_minimax/G.up1.kernel", "G", "G.up1.kernel",
                            [](const G& g) { return loss::generator_loss(g.d_fake, loss::GanObjective::kMinimax); }));
  e.push_back({"txt_img.pixels/image_encoder", [] {
                 const Stack& st = stack();
                 const Tensor txt = rnd({2, st.arch.d_text}, 20);
                 return grad_check(
                     [&](Var x) {
                       nn::Bound ib(x.tape(), st.i, false);
                       return loss::text_image_consistency_loss(enc::encode_image(ib, x, st.arch), x.tape().constant(txt));
                     },
                     rnd({2, 3, 16, 16}, 21));
               }});
  e.push_back(through_stack("txt_img/G.mod0.gamma.kernel", "G", "G.mod0.gamma.kernel", [](const G& g) { return g.l_txt; }));
  e.push_back(through_stack("txt_img/I.conv1.kernel", "image", "I.conv1.kernel", [](const G& g) { return g.l_txt; }));
  e.push_back({"style.pixels/style_net", [] {
                 const Stack& st = stack();
                 return grad_check(
                     [&](Var x) {
                       nn::Bound sb(x.tape(), st.s, false);
                       auto ref = enc::style_features(sb, x.tape().constant(st.ref), st.arch);
                       return loss::style_matching_loss(enc::style_features(sb, x, st.arch), ref);
                     },
                     rnd({2, 3, 16, 16}, 22));
               }});
  e.push_back(through_stack("style/G.out.kernel", "G", "G.out.kernel", [](const G& g) { return g.l_style; }));
  e.push_back(through_stack("style/H.fc1.kernel", "style_head", "H.fc1.kernel", [](const G& g) { return g.l_style; }));
  e.push_back(through_stack("total/G.up2.kernel", "G", "G.up2.kernel", total_objective));
  e.push_back(through_stack("total/H.fc2.kernel", "style_head", "H.fc2.kernel", total_objective));
  e.push_back(through_stack("total/I.fc.kernel", "image", "I.fc.kernel", total_objective));
  e.push_back(through_stack("total/T.embed", "text", "T.embed", total_objective));
  return e;
}

std::vector<GradcheckResult> run_gradcheck(const std::string& filter, double tolerance) {
  std::vector<GradcheckResult> out;
  for (const auto& entry : gradcheck_entries()) {
    if (!filter.empty() && entry.name.find(filter) == std::string::npos) continue;
    const auto t0 = std::chrono::steady_clock::now();
    GradcheckResult r;
    r.name = entry.name;
    r.error = entry.run();
    r.pass = r.error <= tolerance;
    r.ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
    out.push_back(r);
  }
  return out;
}

}  // namespace mmgan::train
