// arbench: offline front end for workspaces, planning, replay and the robot server.

#include <CLI11.hpp>
#include <csignal>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include "arbench/client.hpp"
#include "arbench/kinematics.hpp"
#include "arbench/planner.hpp"
#include "arbench/server.hpp"
#include "arbench/workspace.hpp"

namespace fs = std::filesystem;
using namespace arbench;

namespace {

constexpr int kExitFailure = 1;
constexpr int kExitUnreachable = 2;
constexpr int kExitExecution = 3;
constexpr const char* kAddressEnv = "ARBENCH_ADDRESS";
constexpr const char* kDefaultAddress = "127.0.0.1:7878";

std::string read_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open '" + path + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return buffer.str();
}

std::string default_address() {
  const char* env = std::getenv(kAddressEnv);
  return (env != nullptr && *env != '\0') ? env : kDefaultAddress;
}

/// The workspace's URDF path is relative to the workspace file.
std::string resolve_urdf(const Workspace& ws, const std::string& workspace_path) {
  const fs::path urdf(ws.robot.urdf);
  if (urdf.is_absolute()) return urdf.string();
  return (fs::path(workspace_path).parent_path() / urdf).string();
}

KinematicChain load_workspace_chain(const Workspace& ws, const std::string& workspace_path) {
  return workspace_chain(ws, load_urdf_file(resolve_urdf(ws, workspace_path)));
}

std::string format_translation(double v) {
  if (std::abs(v) < 1e-12) return "0";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.9f", v);
  return buf;
}

std::string format_quaternion(double v) {
  if (std::abs(v) < 1e-12) return "0";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.10g", v);
  return buf;
}

int run_validate(const std::string& path) {
  std::vector<std::string> problems;
  std::string document;
  try {
    document = read_file(path);
  } catch (const Error& e) {
    std::cerr << e.what() << "\n";
    return kExitFailure;
  }
  problems = validate_workspace_document(document);
  if (problems.empty()) {
    const Workspace ws = load_workspace(document);
    try {
      const KinematicChain chain = load_workspace_chain(ws, path);
      for (const auto& [name, traj] : ws.trajectories) {
        try {
          traj.validate(chain);
        } catch (const Error& e) {
          problems.push_back("$.trajectories." + name + ": " + e.what());
        }
      }
    } catch (const Error& e) {
      problems.push_back(std::string("$.robot.urdf: ") + e.what());
    }
  }
  for (const auto& p : problems) std::cout << p << "\n";
  if (problems.empty()) std::cout << path << ": ok\n";
  return problems.empty() ? 0 : kExitFailure;
}

struct PlanArgs {
  std::string workspace;
  std::string out = "plan";
  PlannerParams params;
  std::vector<double> start;
};

int run_plan(const PlanArgs& args) {
  try {
    Workspace ws = load_workspace_file(args.workspace);
    if (ws.keypoints.empty()) throw Error("no keypoints in workspace");
    if (static_cast<std::size_t>(args.params.horizon) < ws.keypoints.size()) {
      throw Error("K > T: " + std::to_string(ws.keypoints.size()) + " keypoints but horizon " +
                  std::to_string(args.params.horizon));
    }
    const KinematicChain chain = load_workspace_chain(ws, args.workspace);
    Eigen::VectorXd q0 = chain.neutral_configuration();
    if (!args.start.empty()) q0 = Eigen::Map<const Eigen::VectorXd>(args.start.data(), static_cast<Eigen::Index>(args.start.size()));
    const auto keypoints = keypoints_in_base_frame(ws);
    const PlanResult result = plan_ilqr(chain, q0, keypoints, args.params);
    ws.trajectories[args.out] = result.trajectory;
    save_workspace_file(ws, args.workspace);

    std::cout.precision(10);
    std::cout << "trajectory " << args.out << ": " << result.trajectory.steps() << " steps, " << result.iterations
              << " iterations" << (result.converged ? "" : " (iteration limit reached)") << "\n";
    std::cout << "cost " << result.cost << "\n";
    const auto errors = keypoint_position_errors(chain, result.trajectory, keypoints);
    for (std::size_t k = 0; k < keypoints.size(); ++k) {
      std::cout << "keypoint " << keypoints[k].id << " step " << result.trajectory.keypoint_indices.at(keypoints[k].id)
                << " position_error " << errors[k] << "\n";
    }
    const auto collisions = check_collisions(chain, result.trajectory, ws);
    if (!collisions.empty()) {
      std::cout << "warning: " << collisions.entries.size() << " link/obstacle contacts along the trajectory\n";
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "plan failed: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run_export(const std::string& path, const std::string& name, const std::string& csv) {
  try {
    const Workspace ws = load_workspace_file(path);
    auto it = ws.trajectories.find(name);
    if (it == ws.trajectories.end()) throw Error("no trajectory named '" + name + "'");
    const std::string text = trajectory_to_csv(it->second);
    if (csv.empty() || csv == "-") {
      std::cout << text;
    } else {
      std::ofstream out(csv, std::ios::binary | std::ios::trunc);
      if (!(out << text)) throw Error("cannot write '" + csv + "'");
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "export failed: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run_replay(const std::string& path, const std::string& name, const std::string& address_text) {
  std::string document;
  double duration = 0.0;
  try {
    document = read_file(path);
    const Workspace ws = load_workspace(document);
    auto it = ws.trajectories.find(name);
    if (it == ws.trajectories.end()) throw Error("no trajectory named '" + name + "'");
    duration = it->second.timestamps.back();
  } catch (const std::exception& e) {
    std::cerr << "replay failed: " << e.what() << "\n";
    return kExitFailure;
  }

  Client client = [&] {
    try {
      return Client::connect(wire::parse_address(address_text));
    } catch (const std::exception& e) {
      std::cerr << "replay failed: " << e.what() << "\n";
      std::exit(kExitUnreachable);
    }
  }();

  try {
    using namespace std::chrono_literals;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::duration<double>(duration + 120.0);
    auto await_reply = [&](wire::MessageId id) {
      while (std::chrono::steady_clock::now() < deadline) {
        auto msg = client.receive(200ms);
        if (!msg) continue;
        if (const auto* ack = std::get_if<wire::Ack>(&*msg); ack && ack->ref == id) return;
        if (const auto* err = std::get_if<wire::ErrorReply>(&*msg); err && err->ref == id) {
          throw Error("server rejected request: " + err->code + ": " + err->text);
        }
      }
      throw Error("timed out waiting for the server");
    };
    client.send(wire::Hello{1, "arbench-replay"});
    await_reply(1);
    client.send(wire::SetWorkspace{2, document});
    await_reply(2);
    client.send(wire::ExecuteTrajectory{3, name, std::nullopt});
    await_reply(3);
    while (std::chrono::steady_clock::now() < deadline) {
      auto msg = client.receive(200ms);
      if (!msg) continue;
      if (const auto* done = std::get_if<wire::ExecutionDone>(&*msg); done && done->name == name) {
        if (done->success) {
          std::cout << "trajectory " << name << " executed\n";
          return 0;
        }
        std::cerr << "replay failed: execution of '" << name << "' did not complete\n";
        return kExitExecution;
      }
      if (const auto* err = std::get_if<wire::ErrorReply>(&*msg); err && err->code == "safety_stop") {
        std::cerr << "replay failed: safety stop: " << err->text << "\n";
        return kExitExecution;
      }
    }
    std::cerr << "replay failed: timed out waiting for execution_done\n";
  } catch (const std::exception& e) {
    std::cerr << "replay failed: " << e.what() << "\n";
  }
  return kExitExecution;
}

struct ServeArgs {
  std::string address;
  std::string urdf;
  std::string workspace;
  double tick_rate = 500.0;
  double state_rate = 50.0;
};

int run_serve(const ServeArgs& args) {
  try {
    Workspace ws;
    std::string urdf = args.urdf;
    if (!args.workspace.empty()) {
      ws = load_workspace_file(args.workspace);
      if (urdf.empty()) urdf = resolve_urdf(ws, args.workspace);
    }
    if (urdf.empty()) throw Error("--urdf or --workspace is required");
    if (ws.robot.urdf.empty()) ws.robot.urdf = urdf;
    SessionConfig config;
    config.tick_rate = args.tick_rate;
    config.state_rate = args.state_rate;
    const auto address = wire::parse_address(args.address.empty() ? default_address() : args.address);

    sigset_t signals;
    sigemptyset(&signals);
    sigaddset(&signals, SIGINT);
    sigaddset(&signals, SIGTERM);
    pthread_sigmask(SIG_BLOCK, &signals, nullptr);

    Server server(Session(load_urdf_file(urdf), std::move(ws), config), {address.host, address.port, true});
    server.start();
    std::cout << "listening on " << address.host << ":" << server.port() << std::endl;
    int received = 0;
    sigwait(&signals, &received);
    server.stop();
    std::cout << "shut down" << std::endl;
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "serve failed: " << e.what() << "\n";
    return kExitFailure;
  }
}

int run_fk(const std::string& urdf, const std::vector<double>& q) {
  try {
    const KinematicChain chain = load_urdf_file(urdf);
    const Eigen::VectorXd qv = Eigen::Map<const Eigen::VectorXd>(q.data(), static_cast<Eigen::Index>(q.size()));
    const RigidTransform pose = forward_kinematics(chain, qv);
    const auto& t = pose.translation();
    const auto& r = pose.rotation();
    std::cout << format_translation(t.x()) << " " << format_translation(t.y()) << " " << format_translation(t.z())
              << " | " << format_quaternion(r.w()) << " " << format_quaternion(r.x()) << " "
              << format_quaternion(r.y()) << " " << format_quaternion(r.z()) << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "fk failed: " << e.what() << "\n";
    return kExitFailure;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Robot programming workbench: workspaces, via-point planning, replay and simulation server"};
  app.require_subcommand(1);

  std::string validate_path;
  auto* validate = app.add_subcommand("validate", "Check a workspace file for schema and invariant violations");
  validate->add_option("workspace", validate_path, "Workspace file")->required();

  PlanArgs plan_args;
  auto* plan = app.add_subcommand("plan", "Plan a trajectory through the workspace keypoints and store it");
  plan->add_option("workspace", plan_args.workspace, "Workspace file (rewritten in place)")->required();
  plan->add_option("--out", plan_args.out, "Name of the stored trajectory")->capture_default_str();
  plan->add_option("--horizon", plan_args.params.horizon, "Number of time steps")->capture_default_str();
  plan->add_option("--dt", plan_args.params.dt, "Seconds per step")->capture_default_str();
  plan->add_option("--control-cost", plan_args.params.control_cost, "Weight on squared joint velocity")
      ->capture_default_str();
  plan->add_option("--max-iterations", plan_args.params.max_iterations)->capture_default_str();
  plan->add_option("--cost-tolerance", plan_args.params.cost_tolerance)->capture_default_str();
  plan->add_option("--line-search-shrink", plan_args.params.line_search_shrink)->capture_default_str();
  plan->add_option("--start", plan_args.start, "Initial joint configuration (default: mid-range of the limits)");

  std::string export_path, export_name, export_csv;
  auto* exp = app.add_subcommand("export", "Write a stored trajectory as CSV");
  exp->add_option("workspace", export_path, "Workspace file")->required();
  exp->add_option("trajectory", export_name, "Trajectory name")->required();
  exp->add_option("--csv", export_csv, "Output path ('-' for stdout)")->required();

  std::string replay_path, replay_name, replay_address;
  auto* replay = app.add_subcommand("replay", "Upload a workspace to a server and execute one of its trajectories");
  replay->add_option("workspace", replay_path, "Workspace file")->required();
  replay->add_option("trajectory", replay_name, "Trajectory name")->required();
  replay->add_option("--address", replay_address, std::string("Server host:port (default $") + kAddressEnv + " or " +
                                                       kDefaultAddress + ")");

  ServeArgs serve_args;
  auto* serve = app.add_subcommand("serve", "Run the simulated robot server");
  serve->add_option("--address", serve_args.address,
                    std::string("Listen host:port (default $") + kAddressEnv + " or " + kDefaultAddress + ")");
  serve->add_option("--urdf", serve_args.urdf, "Robot description");
  serve->add_option("--workspace", serve_args.workspace, "Initial workspace file");
  serve->add_option("--tick-rate", serve_args.tick_rate, "Simulation rate in Hz")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);
  serve->add_option("--state-rate", serve_args.state_rate, "State broadcast rate in Hz")
      ->capture_default_str()
      ->check(CLI::PositiveNumber);

  std::string fk_urdf;
  std::vector<double> fk_q;
  auto* fk = app.add_subcommand("fk", "Print the tool pose: x y z | qw qx qy qz");
  fk->add_option("urdf", fk_urdf, "Robot description")->required();
  fk->add_option("q", fk_q, "Joint values")->allow_extra_args();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  if (*validate) return run_validate(validate_path);
  if (*plan) return run_plan(plan_args);
  if (*exp) return run_export(export_path, export_name, export_csv);
  if (*replay) return run_replay(replay_path, replay_name, replay_address.empty() ? default_address() : replay_address);
  if (*serve) return run_serve(serve_args);
  if (*fk) return run_fk(fk_urdf, fk_q);
  return kExitFailure;
}
