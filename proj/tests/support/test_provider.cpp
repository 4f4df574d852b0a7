// Minimal provider speaking the line protocol, backed by a builtin model
// read from a weights file. Used by the remote and CLI tests; fault modes
// let tests exercise every client-side rejection path.
//
//   nuig_test_provider --weights FILE [--tcp PORT] [--float32]
//                      [--fault MODE] [--record TRACE]

#include <netinet/in.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "nuig/weights_io.hpp"

namespace {

using nlohmann::json;

enum class Fault { none, prob_out_of_range, nan_grad, wrong_id, hang, error, bad_meta };

struct Provider {
  const nuig::DifferentiableModel* model = nullptr;
  Fault fault = Fault::none;
  bool float32 = false;

  double narrow(double v) const { return float32 ? static_cast<double>(static_cast<float>(v)) : v; }

  static json error_response(std::uint64_t id, const std::string& msg) {
    return json{{"id", id}, {"ok", false}, {"error", msg}};
  }

  std::vector<nuig::Tensor> read_inputs(const json& req) const {
    const nuig::Shape shape = req.at("shape").get<nuig::Shape>();
    if (shape != model->input_shape()) {
      throw std::runtime_error("shape " + nuig::shape_to_string(shape) + " does not match model shape " +
                               nuig::shape_to_string(model->input_shape()));
    }
    std::vector<nuig::Tensor> inputs;
    for (const json& row : req.at("inputs")) inputs.emplace_back(shape, row.get<std::vector<double>>());
    return inputs;
  }

  /// Returns the serialized response, or nothing when the request must go unanswered.
  std::optional<std::string> handle(const std::string& line, bool& stop) const {
    json req = json::parse(line, nullptr, false);
    if (req.is_discarded() || !req.is_object()) return error_response(0, "request is not a JSON object").dump();
    std::uint64_t id = 0;
    try {
      id = req.at("id").get<std::uint64_t>();
      const std::string op = req.at("op").get<std::string>();
      if (op == "meta") {
        if (fault == Fault::bad_meta) return json{{"id", id}, {"ok", true}, {"meta", {{"classes", 0}}}}.dump();
        return json{{"id", id},
                    {"ok", true},
                    {"meta", {{"shape", model->input_shape()}, {"classes", model->num_classes()}, {"name", model->name()}}}}
            .dump();
      }
      if (op == "shutdown") {
        stop = true;
        return json{{"id", id}, {"ok", true}}.dump();
      }
      if (op != "forward" && op != "grad") return error_response(id, "unknown op '" + op + "'").dump();
      if (fault == Fault::hang) return std::nullopt;
      if (fault == Fault::error) return error_response(id, "injected provider failure").dump();

      const nuig::TargetSpec target{req.at("target").get<std::size_t>()};
      const std::vector<nuig::Tensor> inputs = read_inputs(req);
      const std::uint64_t echo = fault == Fault::wrong_id ? id + 1 : id;
      if (op == "forward") {
        std::vector<double> probs = model->forward_batch(inputs, target);
        for (double& p : probs) p = narrow(p);
        if (fault == Fault::prob_out_of_range && !probs.empty()) probs[0] = 1.2;
        return json{{"id", echo}, {"ok", true}, {"probs", probs}}.dump();
      }
      json grads = json::array();
      for (const nuig::Tensor& g : model->grad_batch(inputs, target)) {
        std::vector<double> row(g.values().begin(), g.values().end());
        for (double& v : row) v = narrow(v);
        grads.push_back(row);
      }
      std::string out = json{{"id", echo}, {"ok", true}, {"grads", grads}}.dump();
      if (fault == Fault::nan_grad) {
        // JSON has no NaN; emit the token a careless provider would write
        const auto at = out.find("[[") + 2;
        out.replace(at, out.find_first_of(",]", at) - at, "NaN");
      }
      return out;
    } catch (const std::exception& e) {
      return error_response(id, e.what()).dump();
    }
  }
};

/// Reads newline-terminated requests from `in_fd` and answers on `out_fd`.
void serve(const Provider& p, int in_fd, int out_fd, std::ofstream* record) {
  std::string buffer;
  char chunk[4096];
  bool stop = false;
  while (!stop) {
    const auto nl = buffer.find('\n');
    if (nl == std::string::npos) {
      const ssize_t got = ::read(in_fd, chunk, sizeof chunk);
      if (got <= 0) return;
      buffer.append(chunk, static_cast<std::size_t>(got));
      continue;
    }
    const std::string line = buffer.substr(0, nl);
    buffer.erase(0, nl + 1);
    const std::optional<std::string> resp = p.handle(line, stop);
    if (record) *record << '>' << line << '\n';
    if (!resp) continue;
    if (record) *record << '<' << *resp << '\n' << std::flush;
    const std::string framed = *resp + '\n';
    for (std::size_t off = 0; off < framed.size();) {
      const ssize_t n = ::write(out_fd, framed.data() + off, framed.size() - off);
      if (n <= 0) return;
      off += static_cast<std::size_t>(n);
    }
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Line-protocol model provider for tests"};
  std::string weights, fault_name = "none", record_path;
  std::optional<int> tcp_port;
  bool float32 = false;
  app.add_option("--weights", weights, "weights file")->required();
  app.add_option("--tcp", tcp_port, "listen on this TCP port (0 picks one) instead of stdio");
  app.add_option("--fault", fault_name, "fault injection mode")
      ->check(CLI::IsMember({"none", "prob_out_of_range", "nan_grad", "wrong_id", "hang", "error", "bad_meta"}));
  app.add_option("--record", record_path, "append a trace of every exchange");
  app.add_flag("--float32", float32, "round every value to single precision");
  CLI11_PARSE(app, argc, argv);

  const std::map<std::string, Fault> faults{{"none", Fault::none},
                                            {"prob_out_of_range", Fault::prob_out_of_range},
                                            {"nan_grad", Fault::nan_grad},
                                            {"wrong_id", Fault::wrong_id},
                                            {"hang", Fault::hang},
                                            {"error", Fault::error},
                                            {"bad_meta", Fault::bad_meta}};
  try {
    const nuig::BuiltinModel model = nuig::load_model(weights);
    Provider p{&nuig::as_model(model), faults.at(fault_name), float32};
    std::optional<std::ofstream> record;
    if (!record_path.empty()) record.emplace(record_path, std::ios::app);

    if (!tcp_port) {
      serve(p, STDIN_FILENO, STDOUT_FILENO, record ? &*record : nullptr);
      return 0;
    }
    const int listener = ::socket(AF_INET, SOCK_STREAM, 0);
    const int one = 1;
    ::setsockopt(listener, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
    addr.sin_port = htons(static_cast<std::uint16_t>(*tcp_port));
    if (::bind(listener, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listener, 1) != 0) {
      std::perror("bind");
      return 1;
    }
    socklen_t len = sizeof addr;
    ::getsockname(listener, reinterpret_cast<sockaddr*>(&addr), &len);
    std::cout << "listening " << ntohs(addr.sin_port) << std::endl;
    const int conn = ::accept(listener, nullptr, nullptr);
    if (conn < 0) return 1;
    serve(p, conn, conn, record ? &*record : nullptr);
    ::close(conn);
    ::close(listener);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "provider: " << e.what() << '\n';
    return 1;
  }
}
