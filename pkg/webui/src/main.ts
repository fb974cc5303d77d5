import { ChatApp } from "./chatApp.js";

const root = document.getElementById("app");
if (root !== null) {
  void new ChatApp(root).start();
}
