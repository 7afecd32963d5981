import "./style.css";
import { mountApp } from "./main";

mountApp(document.getElementById("app")!);
